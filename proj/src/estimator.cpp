#include "loader/estimator.hpp"

#include <algorithm>
#include <bit>

#include "loader/app_model.hpp"

namespace loader {

namespace {
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
}  // namespace

RateEstimatorWindow::RateEstimatorWindow(std::int64_t delta_ns, std::uint32_t window)
    : delta_ns_(delta_ns), shift_(0), buffer_(window, 0) {
  if (delta_ns <= 0) throw Error("estimator delta must be positive");
  if (!std::has_single_bit(window)) throw Error("estimator window must be a power of two");
  shift_ = static_cast<std::uint32_t>(std::countr_zero(window));
}

void RateEstimatorWindow::advance(std::int64_t t_now) {
  const std::int64_t b = floor_div(t_now, delta_ns_);
  if (b <= bucket_) return;
  // Close the open bucket, then push empties for skipped ones (at most w).
  const std::int64_t closes = std::min<std::int64_t>(b - bucket_, static_cast<std::int64_t>(buffer_.size()) + 1);
  std::uint64_t value = open_count_;
  for (std::int64_t i = 0; i < closes; ++i) {
    window_sum_ -= buffer_[head_];
    buffer_[head_] = value;
    window_sum_ += value;
    head_ = (head_ + 1) % buffer_.size();
    value = 0;
  }
  bucket_ = b;
  open_count_ = 0;
}

void RateEstimatorWindow::update(std::int64_t t_now, std::uint64_t increment) {
  advance(t_now);
  open_count_ += increment;
}

std::uint64_t RateEstimatorWindow::read(std::int64_t t_now) {
  advance(t_now);
  const std::uint64_t per_bucket = window_sum_ >> shift_;
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(per_bucket) * 1'000'000'000ULL) / static_cast<std::uint64_t>(delta_ns_));
}

}  // namespace loader
