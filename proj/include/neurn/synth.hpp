#pragma once

#include "neurn/domainbench.hpp"
#include "neurn/reprs.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace neurn::synth {

/// Positive anisotropic Gaussian bumps, one per (filter, channel), shaped
/// like a first-layer convolution bank: [filters, channels, size, size].
Tensor kernel_bank(int filters, int channels, int size, std::uint64_t seed);

/// The same bank with every kernel channel passed through NeuRN.
Tensor neurn_kernel_bank(const Tensor& bank, const NeurnConfig& cfg = {});

struct NeuronPopulation {
  Tensor stimuli;                    // [stimuli, side, side] in [0, 1]
  std::vector<TrialTraces> neurons;  // sorted by neuron_id
};

struct PopulationSpec {
  int excitatory = 500;
  int inhibitory = 500;
  int stimuli = 100;
  int side = 28;
  int prototypes = 10;
  int trace_len = 8;
};

/// Synthetic recordings with a known answer.
///
/// Stimuli are 0.5 plus a mixture of prototype maps (taken from the kernel
/// bank) with per-stimulus weights, plus centred pixel noise. The weight
/// columns are orthonormal and orthogonal to the all-ones vector.
/// Excitatory neurons respond linearly to one prototype's weight, so their
/// T^T*FS map is that prototype plus a little noise. Inhibitory responses
/// are drawn orthogonal to every prototype weight, so their map is pure
/// pixel noise. Peak responses are positive and each trial trace peaks at
/// exactly its response value.
NeuronPopulation neuron_population(const Tensor& kernel_bank, const PopulationSpec& spec,
                                   std::uint64_t seed);

/// Seven-segment style digit glyphs with random pose, stroke width and
/// noise: dim strokes (ink 0.1 to 0.2) on an exactly black background.
/// Labels 0..9, balanced round-robin.
DomainDataset digits(int count, int side, std::uint64_t seed, const std::string& name = "digits");

/// Writes stimuli.ntf, neurons/*.ntf, kernels.ntf and kernels_neurn.ntf.
void write_population(const std::filesystem::path& dir, const Tensor& bank,
                      const Tensor& neurn_bank, const NeuronPopulation& pop);

}  // namespace neurn::synth
