// pipeline.hpp
// End-to-end workflows behind the CLI: mask-driven enhancement of recorded
// audio, seeded synthetic experiments with metric reports, and scenario
// synthesis.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maskbeam/beamform.hpp"
#include "maskbeam/metrics.hpp"

namespace maskbeam {

enum class FilterMode { crm, sc, mc };

struct PipelineConfig {
    // stft
    std::size_t fft_size = 512;
    double window_ms = 32.0;
    double hop_fraction = 0.5;
    // em
    unsigned em_iterations = 20;
    bool rank1 = true;
    double loading_eps = 1e-6;
    unsigned threads = 0;  // 0 = hardware concurrency
    // beamform
    std::size_t reference_channel = 0;
    double gain_floor = 0.0;
    double band_split_hz = 1000.0;
    bool subarray = true;
    // experiment
    unsigned trials = 20;
    std::vector<double> snr_list = {-5.0, 0.0, 5.0, 10.0};
    std::uint64_t seed = 12345;
    double corruption = 1.0;
    double duration_s = 2.0;
    double sample_rate = 16000.0;
    unsigned jobs = 1;
    // command wiring
    FilterMode mode = FilterMode::mc;
    bool skip_refinement = false;
    std::string input_wav;
    std::vector<std::string> mask_files;
    std::string output_wav;
    std::string out_dir = "out";
    std::string scenario_file;
    std::string loglik_csv;
    std::string dump_mask;

    std::size_t window_samples(double rate) const;
    std::size_t hop_samples(double rate) const;
};

// CLI flag values; only fields the user actually passed are set.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> snr_db;  // collapses snr_list to one entry
    std::optional<unsigned> trials;
    std::optional<FilterMode> mode;
    std::optional<bool> skip_refinement;
    std::optional<unsigned> em_iters;
    std::optional<bool> rank1;
    std::optional<bool> subarray;
    std::optional<std::string> out_dir;
    std::optional<unsigned> jobs;
    std::optional<double> corruption;
    std::optional<unsigned> threads;
    std::optional<double> duration_s;
    std::optional<double> gain_floor;
    std::optional<std::size_t> reference_channel;
};

// Layered resolution: built-in defaults, then the config file, then flags.
PipelineConfig resolve_config(const std::optional<std::string>& config_path,
                              const ConfigOverrides& overrides);
void apply_config_text(PipelineConfig& config, const std::string& text,
                       const std::string& origin);

// Refinement plus beamforming on a prepared spectrogram; honours the
// sub-array split when enabled. lambda is the refined (band-fused) mask, or
// the prior when refinement is skipped.
struct PipelineProducts {
    RealMask lambda_s;
    MultichannelSpectrogram enhanced;  // mc output; empty unless requested
    std::vector<double> loglik;        // summed over sub-arrays
    std::vector<std::string> warnings;
};

PipelineProducts run_pipeline(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                              const RealMask& alpha_n, const ArrayGeometry& geometry,
                              const PipelineConfig& config, bool refine_masks,
                              bool want_beamformer);

// One row of the experiment report.
struct TrialMetrics {
    std::uint64_t scenario_seed = 0;
    double snr_db = 0.0;
    double auc_prior = 0.0;
    double auc_refined = 0.0;
    double sisnr_in = 0.0;
    double sisnr_out_sc = 0.0;      // single-channel Wiener, refined mask
    double sisnr_out_mc = 0.0;      // multi-channel Wiener, refined mask
    double sisnr_out_crm = 0.0;     // per-channel mask applied at the reference
    double sisnr_out_sc_raw = 0.0;  // single-channel Wiener, prior mask
    double sisnr_out_mc_raw = 0.0;  // multi-channel Wiener, prior mask
    RocCurve roc_prior;
    RocCurve roc_refined;
};

TrialMetrics run_trial(std::uint64_t trial_seed, double snr_db, const PipelineConfig& config);

// Source signals and mixture for a scenario; sub-seeds derive from
// scenario.seed so a stored scenario file reproduces the exact mixture.
MixResult synthesize_scene(const Scenario& scenario, std::size_t reference_channel);

void cmd_enhance(const PipelineConfig& config);
void cmd_experiment(const PipelineConfig& config);
void cmd_simulate(const PipelineConfig& config);

}  // namespace maskbeam
