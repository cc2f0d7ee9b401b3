#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mrecon/error.hpp"

namespace mrecon {

/// Dense row-major H x W x C grid. Channel index varies fastest.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels <= 0) {
      throw InvalidArgument("raster dimensions must be non-negative with at least one channel");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  T& operator()(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  const T& operator()(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  template <typename U>
  bool same_grid(const Raster<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Raster&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

template <typename A, typename B>
void require_same_grid(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!a.same_grid(b)) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.height()) + "x" +
                            std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                            "x" + std::to_string(b.width()));
  }
}

}  // namespace mrecon
