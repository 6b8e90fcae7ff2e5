#include "coarsen/randomness.hpp"

#include <cmath>
#include <stdexcept>

#include "coarsen/rng.hpp"

namespace coarsen {

RingStream::RingStream(std::size_t n_sites, std::uint64_t seed, double horizon)
    : rng_(stream_seed(seed, Stream::Rings)),
      n_(n_sites),
      inv_rate_(1.0 / static_cast<double>(n_sites)),
      horizon_(horizon) {
  if (n_sites == 0) throw std::invalid_argument("ring stream needs at least one site");
  if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
}

RandomnessRecord generate_randomness(const Box& box, double horizon, std::uint64_t seed) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  RandomnessRecord rec{seed, box, horizon, {}};
  rec.events.reserve(static_cast<std::size_t>(static_cast<double>(box.size()) * horizon * 1.05) + 16);
  RingStream stream(box.size(), seed, horizon);
  RingEvent ev;
  while (stream.next(ev)) rec.events.push_back(ev);
  return rec;
}

SpinConfig initial_config(const ProcessSpec& spec, std::uint64_t seed) {
  Rng rng(stream_seed(seed, Stream::Initial));
  return sample_initial(spec.init, spec.box, rng);
}

}  // namespace coarsen
