// Serial reference vs OpenMP kernels: trial fan-out and the uniformized mat-vec.
#include <chrono>
#include <cstdio>
#include <vector>

#include "coarsen/engine.hpp"
#include "coarsen/oracle.hpp"
#include "coarsen/randomness.hpp"
#include "coarsen/trials.hpp"

using namespace coarsen;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  const int threads = available_threads();
  std::printf("threads available: %d\n", threads);

  {
    const ProcessSpec spec{Box::centered(20), Boundary::Periodic, InitSpec{}, FreezeSchedule::origin_plus()};
    const Lattice lattice(spec.box, spec.boundary);
    auto trial = [&](std::size_t, std::uint64_t seed) {
      Process p(spec, lattice, initial_config(spec, seed));
      RingStream rings(lattice.size(), seed, 10.0);
      NullObserver obs;
      return drive(p, rings, obs);
    };
    std::vector<std::uint64_t> a, b;
    const double ts = seconds([&] { a = run_trials_serial(200, 7, trial); });
    const double tp = seconds([&] { b = run_trials_parallel(200, 7, threads, trial); });
    std::uint64_t events = 0;
    for (auto e : a) events += e;
    std::printf("trials 200 x 41x41 to T=10: serial %.3fs, parallel %.3fs, %.1f Mrings/s serial, identical=%s\n", ts,
                tp, events / ts / 1e6, a == b ? "yes" : "no");
  }

  {
    const ProcessSpec spec{Box(Site{0, 0}, Site{3, 2}), Boundary::FixedMinus, InitSpec{}, {}};
    const auto q = build_generator(spec);
    std::vector<double> in(q.states(), 1.0 / static_cast<double>(q.states())), o1(q.states()), o2(q.states());
    const int reps = 200;
    const double ts = seconds([&] {
      for (int r = 0; r < reps; ++r) uniformized_step_serial(q, 12.0, in, o1, nullptr);
    });
    const double tp = seconds([&] {
      for (int r = 0; r < reps; ++r) uniformized_step_parallel(q, 12.0, in, o2, nullptr);
    });
    double diff = 0.0;
    for (std::size_t i = 0; i < o1.size(); ++i) diff = std::max(diff, std::abs(o1[i] - o2[i]));
    std::printf("mat-vec 4096 states x %d: serial %.3fs, parallel %.3fs, max |diff| %.2e\n", reps, ts, tp, diff);
  }
  return 0;
}
