#include "falconn/stl/signal.hpp"

#include "falconn/error.hpp"

namespace falconn::stl {

SampledSignal::SampledSignal(std::vector<double> times,
                             std::vector<Channel> channels)
    : times_(std::move(times)), channels_(std::move(channels)) {
  if (times_.empty()) throw Error("signal needs at least one sample");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw Error("signal times must be strictly increasing (index " +
                  std::to_string(i) + ")");
    }
  }
  for (const Channel& c : channels_) {
    if (c.values.size() != times_.size()) {
      throw Error("channel '" + c.name + "' has " +
                  std::to_string(c.values.size()) + " samples, expected " +
                  std::to_string(times_.size()));
    }
  }
}

std::optional<std::size_t> SampledSignal::find(const std::string& name) const {
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (channels_[i].name == name) return i;
  }
  return std::nullopt;
}

const std::vector<double>& SampledSignal::values(
    const std::string& name) const {
  const auto idx = find(name);
  if (!idx) throw UnknownChannelError(name);
  return channels_[*idx].values;
}

std::vector<std::string> SampledSignal::channel_names() const {
  std::vector<std::string> names;
  names.reserve(channels_.size());
  for (const Channel& c : channels_) names.push_back(c.name);
  return names;
}

}  // namespace falconn::stl
