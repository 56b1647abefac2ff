// Kernel interpolation on the free-field desk preset as the number of
// observed sensors grows. Prints one CSV row per subset size.
//
//   build/demos/kernel_sweep [lambda]

#include <cstdlib>
#include <iostream>

#include "sfr/kernel_interp.hpp"
#include "sfr/metrics.hpp"
#include "sfr/room_sim.hpp"

int main(int argc, char** argv) {
  const double lambda = argc > 1 ? std::atof(argv[1]) : 1e-3;
  const auto preset = sfr::DeskPreset::free_field();
  const auto source = sfr::bandlimited_noise(preset.samples, preset.fs, 200.0, 2000.0, 11);
  const auto field = sfr::simulate_dataset(preset.env, preset.source, preset.grid, source, preset.samples, preset.fs);

  std::cout << sfr::NmseReport::csv_header() << '\n';
  for (double fraction : {0.125, 0.25, 0.5, 0.75}) {
    const auto subset = sfr::select_subset(field.grid, fraction, 3);
    const auto model = sfr::kernel_fit(field, subset, lambda);
    const auto estimate = sfr::kernel_reconstruct(model, field.grid);
    std::cout << sfr::nmse_report(estimate, field, subset, "kernel").csv_row() << '\n';
  }
}
