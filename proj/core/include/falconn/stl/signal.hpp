#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace falconn::stl {

struct Channel {
  std::string name;
  std::vector<double> values;
};

/// Named real-valued channels sampled on a shared, strictly increasing time
/// grid. Construction validates the shape invariants.
class SampledSignal {
 public:
  SampledSignal(std::vector<double> times, std::vector<Channel> channels);

  const std::vector<double>& times() const { return times_; }
  const std::vector<Channel>& channels() const { return channels_; }
  std::size_t size() const { return times_.size(); }

  /// Index of the named channel, or nullopt.
  std::optional<std::size_t> find(const std::string& name) const;
  const std::vector<double>& values(const std::string& name) const;

  std::vector<std::string> channel_names() const;

 private:
  std::vector<double> times_;
  std::vector<Channel> channels_;
};

}  // namespace falconn::stl
