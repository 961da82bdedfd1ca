#pragma once

#include <cstdint>
#include <vector>

namespace loader {

/// Windowed rate estimator. Buckets are [b*delta, (b+1)*delta) in absolute
/// time; a read averages the last w closed buckets with a shift.
class RateEstimatorWindow {
 public:
  RateEstimatorWindow(std::int64_t delta_ns, std::uint32_t window);

  void update(std::int64_t t_now, std::uint64_t increment);
  /// Events per second over the last w closed buckets.
  std::uint64_t read(std::int64_t t_now);

  std::int64_t delta_ns() const { return delta_ns_; }
  std::uint32_t window() const { return static_cast<std::uint32_t>(buffer_.size()); }

 private:
  void advance(std::int64_t t_now);

  std::int64_t delta_ns_;
  std::uint32_t shift_;
  std::vector<std::uint64_t> buffer_;
  std::size_t head_ = 0;          // next slot to overwrite
  std::uint64_t window_sum_ = 0;
  std::int64_t bucket_ = 0;       // index of the open bucket
  std::uint64_t open_count_ = 0;
};

}  // namespace loader
