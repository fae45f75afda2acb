#pragma once

#include <map>

#include "radscan/simulator.hpp"
#include "radscan/spectra.hpp"

namespace radscan {

// Stand-in source and background spectra for simulation: Gaussian photopeaks at
// characteristic line energies with a NaI-like resolution, a flat Compton continuum
// under each line, and a shielded form that attenuates low energies and adds
// down-scattered counts. The histograms use 2 keV bins from 11 keV to 4001 keV.
struct SyntheticSpectra {
  IntensityHistogram background;
  // Sources 1..5, shielded and unshielded; source 6 is derived by mixing.
  std::map<SourceVariantId, IntensityHistogram> sources;
};

SyntheticSpectra make_synthetic_spectra();

// Pmfs on `grid` for the background and all twelve variants.
SpectrumLibrary make_spectrum_library(const SyntheticSpectra& spectra, const EnergyGrid& grid = EnergyGrid());

}  // namespace radscan
