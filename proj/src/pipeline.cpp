// pipeline.cpp

#include "maskbeam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "maskbeam/kv.hpp"

namespace maskbeam {

namespace {

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

unsigned effective_threads(const PipelineConfig& config) {
    if (config.threads != 0) return config.threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

MultichannelSpectrogram single_channel_like(const MultichannelSpectrogram& y) {
    MultichannelSpectrogram out(y.frames, y.bins, 1);
    out.frame_shift = y.frame_shift;
    out.fft_size = y.fft_size;
    out.window_length = y.window_length;
    out.sample_rate = y.sample_rate;
    return out;
}

// samples [window, total - window): frames fully covered by overlap, used
// for every waveform metric
std::pair<std::size_t, std::size_t> interior_range(std::size_t total, std::size_t window) {
    if (total <= 2 * window) throw DataError("signal too short for interior evaluation");
    return {window, total - window};
}

double interior_si_snr(const Waveform& estimate, std::span<const double> reference,
                       std::size_t window) {
    const std::size_t n = std::min(estimate.samples, reference.size());
    const auto [lo, hi] = interior_range(n, window);
    return si_snr(estimate.channel(0).subspan(lo, hi - lo), reference.subspan(lo, hi - lo));
}

}  // namespace

std::size_t PipelineConfig::window_samples(double rate) const {
    const double exact = window_ms * rate / 1000.0;
    const std::size_t w = std::size_t(std::lround(exact));
    if (w == 0 || w % 2 != 0) throw DataError("window length in samples must be even");
    if (w > fft_size) throw DataError("window length exceeds fft size");
    return w;
}

std::size_t PipelineConfig::hop_samples(double rate) const {
    if (hop_fraction != 0.5) throw DataError("only 50% overlap is supported");
    return window_samples(rate) / 2;
}

void apply_config_text(PipelineConfig& config, const std::string& text,
                       const std::string& origin) {
    const std::map<std::string, std::string> kv = parse_kv_text(text, origin);
    for (const auto& [key, value] : kv) {
        if (key == "stft.fft_size") config.fft_size = kv_to_u64(value, key);
        else if (key == "stft.window_ms") config.window_ms = kv_to_double(value, key);
        else if (key == "stft.hop_fraction") config.hop_fraction = kv_to_double(value, key);
        else if (key == "em.iterations") config.em_iterations = unsigned(kv_to_u64(value, key));
        else if (key == "em.rank1") config.rank1 = kv_to_bool(value, key);
        else if (key == "em.loading_eps") config.loading_eps = kv_to_double(value, key);
        else if (key == "em.threads") config.threads = unsigned(kv_to_u64(value, key));
        else if (key == "beamform.reference_channel")
            config.reference_channel = kv_to_u64(value, key);
        else if (key == "beamform.gain_floor") config.gain_floor = kv_to_double(value, key);
        else if (key == "beamform.band_split_hz")
            config.band_split_hz = kv_to_double(value, key);
        else if (key == "beamform.subarray") config.subarray = kv_to_bool(value, key);
        else if (key == "experiment.trials") config.trials = unsigned(kv_to_u64(value, key));
        else if (key == "experiment.snr_list") config.snr_list = kv_to_doubles(value, key);
        else if (key == "experiment.seed") config.seed = kv_to_u64(value, key);
        else if (key == "experiment.corruption") config.corruption = kv_to_double(value, key);
        else if (key == "experiment.duration_s") config.duration_s = kv_to_double(value, key);
        else if (key == "experiment.sample_rate")
            config.sample_rate = kv_to_double(value, key);
        else if (key == "experiment.jobs") config.jobs = unsigned(kv_to_u64(value, key));
        else throw DataError(origin + ": unknown config key '" + key + "'");
    }
}

PipelineConfig resolve_config(const std::optional<std::string>& config_path,
                              const ConfigOverrides& overrides) {
    PipelineConfig config;
    if (config_path) {
        std::ifstream in(*config_path);
        if (!in) throw DataError("cannot open config file: " + *config_path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        apply_config_text(config, text, *config_path);
    }
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.snr_db) config.snr_list = {*overrides.snr_db};
    if (overrides.trials) config.trials = *overrides.trials;
    if (overrides.mode) config.mode = *overrides.mode;
    if (overrides.skip_refinement) config.skip_refinement = *overrides.skip_refinement;
    if (overrides.em_iters) config.em_iterations = *overrides.em_iters;
    if (overrides.rank1) config.rank1 = *overrides.rank1;
    if (overrides.subarray) config.subarray = *overrides.subarray;
    if (overrides.out_dir) config.out_dir = *overrides.out_dir;
    if (overrides.jobs) config.jobs = *overrides.jobs;
    if (overrides.corruption) config.corruption = *overrides.corruption;
    if (overrides.threads) config.threads = *overrides.threads;
    if (overrides.duration_s) config.duration_s = *overrides.duration_s;
    if (overrides.gain_floor) config.gain_floor = *overrides.gain_floor;
    if (overrides.reference_channel) config.reference_channel = *overrides.reference_channel;
    return config;
}

PipelineProducts run_pipeline(const MultichannelSpectrogram& y, const RealMask& alpha_s,
                              const RealMask& alpha_n, const ArrayGeometry& geometry,
                              const PipelineConfig& config, bool refine_masks,
                              bool want_beamformer) {
    struct Single {
        RealMask lambda_s, lambda_n;
        MultichannelSpectrogram shat;
        std::vector<double> loglik;
        std::vector<std::string> warnings;
    };

    auto run_single = [&](const MultichannelSpectrogram& sub, std::size_t sub_ref) {
        Single out;
        if (refine_masks) {
            CgmmConfig em;
            em.iterations = config.em_iterations;
            em.rank1_source = config.rank1;
            em.loading_eps = config.loading_eps;
            em.threads = effective_threads(config);
            CgmmState state = refine(sub, alpha_s, alpha_n, em);
            out.lambda_s = std::move(state.lambda_s);
            out.lambda_n = std::move(state.lambda_n);
            out.loglik = std::move(state.loglik);
            out.warnings = std::move(state.warnings);
        } else {
            out.lambda_s = alpha_s;
            out.lambda_n = alpha_n;
        }
        if (want_beamformer) {
            // Refined posteriors can hit exactly 0 across all frames at
            // frequencies without speech (or noise) energy, which leaves the
            // weighted statistics undefined. The statistics use floored
            // weights; the post-filter gain keeps the exact posteriors, so
            // such bins still end up fully suppressed.
            RealMask sos_s = out.lambda_s;
            RealMask sos_n = out.lambda_n;
            for (double& v : sos_s.values) v = std::max(v, 1e-10);
            for (double& v : sos_n.values) v = std::max(v, 1e-10);
            const SecondOrderStats stats = compute_sos(sub, sos_s, sos_n);
            const std::vector<cdouble> r = steering_vector(stats.Phi_s, sub_ref);
            MwfConfig mwf;
            mwf.reference_channel = sub_ref;
            mwf.loading_eps = config.loading_eps;
            mwf.gain_floor = config.gain_floor;
            const BeamformerBank bank = mwf_weights(stats, r, out.lambda_s, out.lambda_n, mwf);
            out.shat = apply_filter(sub, bank);
        }
        return out;
    };

    PipelineProducts products;
    if (!config.subarray) {
        Single full = run_single(y, config.reference_channel);
        products.lambda_s = std::move(full.lambda_s);
        products.enhanced = std::move(full.shat);
        products.loglik = std::move(full.loglik);
        products.warnings = std::move(full.warnings);
        return products;
    }

    if (!geometry.has_subarrays())
        throw DataError("subarray mode requires a geometry with declared sub-arrays");
    if (geometry.channels() != y.channels)
        throw DataError("subarray mode: geometry/spectrogram channel mismatch");

    auto run_sub = [&](const std::vector<std::size_t>& idx) {
        const auto ref_it =
            std::find(idx.begin(), idx.end(), config.reference_channel);
        if (ref_it == idx.end())
            throw DataError("reference channel is not part of a sub-array");
        const MultichannelSpectrogram sub =
            y.select_channels(std::span<const std::size_t>(idx));
        return run_single(sub, std::size_t(ref_it - idx.begin()));
    };

    Single low = run_sub(geometry.small_subarray);
    Single high = run_sub(geometry.large_subarray);

    // bins below the split come from the small sub-array, the rest from the
    // large one; the posterior masks are stitched the same way
    products.lambda_s = std::move(low.lambda_s);
    for (std::size_t f = 0; f < y.bins; ++f) {
        if (y.bin_hz(f) < config.band_split_hz) continue;
        for (std::size_t t = 0; t < y.frames; ++t) {
            products.lambda_s.at(t, f) = high.lambda_s.at(t, f);
        }
    }
    if (want_beamformer) {
        products.enhanced = std::move(low.shat);
        for (std::size_t f = 0; f < y.bins; ++f) {
            if (y.bin_hz(f) < config.band_split_hz) continue;
            for (std::size_t t = 0; t < y.frames; ++t) {
                products.enhanced.at(t, f, 0) = high.shat.at(t, f, 0);
            }
        }
    }
    if (!low.loglik.empty()) {
        products.loglik.resize(low.loglik.size(), 0.0);
        for (std::size_t i = 0; i < low.loglik.size(); ++i) {
            products.loglik[i] = low.loglik[i] + high.loglik[i];
        }
    }
    for (std::string& w : low.warnings) products.warnings.push_back("small: " + std::move(w));
    for (std::string& w : high.warnings) products.warnings.push_back("large: " + std::move(w));
    return products;
}

MixResult synthesize_scene(const Scenario& scenario, std::size_t reference_channel) {
    const std::size_t samples =
        std::size_t(std::lround(scenario.duration_s * scenario.sample_rate));
    if (samples == 0) throw DataError("synthesize_scene: zero duration");
    const Waveform speech =
        synth_speech(derive_seed(scenario.seed, 101), samples, scenario.sample_rate);
    const Waveform noise =
        synth_noise(derive_seed(scenario.seed, 102), samples, scenario.sample_rate);
    const RirSet speech_rirs = image_source_rir(scenario, scenario.source_pos);
    const RirSet noise_rirs = image_source_rir(scenario, scenario.noise_pos);
    return mix_at_snr(speech, noise, speech_rirs, noise_rirs, scenario.snr_db,
                      reference_channel);
}

TrialMetrics run_trial(std::uint64_t trial_seed, double snr_db,
                       const PipelineConfig& config) {
    ScenarioRanges ranges;
    ranges.snr_db = snr_db;
    ranges.sample_rate = config.sample_rate;
    ranges.duration_s = config.duration_s;
    const Scenario scenario = sample_scenario(ranges, trial_seed);
    const MixResult mix = synthesize_scene(scenario, config.reference_channel);

    const std::size_t window = config.window_samples(scenario.sample_rate);
    const std::size_t hop = config.hop_samples(scenario.sample_rate);
    const MultichannelSpectrogram Y = stft(mix.mixture, config.fft_size, window, hop);
    const MultichannelSpectrogram S = stft(mix.speech_image, config.fft_size, window, hop);
    const MultichannelSpectrogram N = stft(mix.noise_image, config.fft_size, window, hop);

    const RealMask gamma = oracle_mask(S, N);
    const RealMask corrupted =
        corrupt_mask(gamma, config.corruption, derive_seed(scenario.seed, 103));
    const RealMask alpha_s = median_pool(corrupted);
    const RealMask alpha_n = complement_mask(alpha_s);
    const BinaryMask labels = ideal_binary_mask(S, N, config.reference_channel);

    const PipelineProducts refined =
        run_pipeline(Y, alpha_s, alpha_n, scenario.geometry, config, true, true);
    const PipelineProducts raw =
        run_pipeline(Y, alpha_s, alpha_n, scenario.geometry, config, false, true);

    // single-channel variants at the reference microphone
    const std::size_t ref = config.reference_channel;
    MultichannelSpectrogram sc_ref = single_channel_like(Y);
    MultichannelSpectrogram sc_raw = single_channel_like(Y);
    MultichannelSpectrogram crm = single_channel_like(Y);
    for (std::size_t t = 0; t < Y.frames; ++t) {
        for (std::size_t f = 0; f < Y.bins; ++f) {
            const cdouble yref = Y.at(t, f, ref);
            sc_ref.at(t, f, 0) =
                std::max(std::sqrt(refined.lambda_s.at(t, f)), config.gain_floor) * yref;
            sc_raw.at(t, f, 0) =
                std::max(std::sqrt(alpha_s.at(t, f)), config.gain_floor) * yref;
            crm.at(t, f, 0) = corrupted.at(t, f, ref) * yref;
        }
    }

    TrialMetrics row;
    row.scenario_seed = scenario.seed;
    row.snr_db = snr_db;

    const std::span<const double> ref_wave = mix.speech_image.channel(ref);
    const std::size_t out_len = hop * (Y.frames - 1) + window;
    const auto [lo, hi] = interior_range(out_len, window);
    row.sisnr_in = si_snr(mix.mixture.channel(ref).subspan(lo, hi - lo),
                          ref_wave.subspan(lo, hi - lo));
    row.sisnr_out_mc = interior_si_snr(istft(refined.enhanced), ref_wave, window);
    row.sisnr_out_mc_raw = interior_si_snr(istft(raw.enhanced), ref_wave, window);
    row.sisnr_out_sc = interior_si_snr(istft(sc_ref), ref_wave, window);
    row.sisnr_out_sc_raw = interior_si_snr(istft(sc_raw), ref_wave, window);
    row.sisnr_out_crm = interior_si_snr(istft(crm), ref_wave, window);

    // mask accuracy over the interior frames
    std::vector<double> prior_scores, refined_scores;
    std::vector<std::uint8_t> label_vec;
    for (std::size_t t = 1; t + 1 < Y.frames; ++t) {
        for (std::size_t f = 0; f < Y.bins; ++f) {
            prior_scores.push_back(alpha_s.at(t, f));
            refined_scores.push_back(refined.lambda_s.at(t, f));
            label_vec.push_back(labels.at(t, f));
        }
    }
    row.roc_prior = roc(prior_scores, label_vec);
    row.roc_refined = roc(refined_scores, label_vec);
    row.auc_prior = auc(row.roc_prior);
    row.auc_refined = auc(row.roc_refined);
    return row;
}

namespace {

void write_roc_csv(const std::string& path, const RocCurve& curve) {
    std::string out = "fpr,tpr\n";
    for (const RocPoint& p : curve.points) {
        out += fmt_num(p.fpr);
        out += ',';
        out += fmt_num(p.tpr);
        out += '\n';
    }
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << out;
    if (!os) throw DataError("failed writing ROC CSV: " + path);
}

}  // namespace

void cmd_experiment(const PipelineConfig& config) {
    if (config.trials == 0) throw DataError("experiment requires at least one trial");
    std::filesystem::create_directories(config.out_dir);

    const std::size_t rows = config.snr_list.size() * config.trials;
    std::vector<TrialMetrics> results(rows);

    PipelineConfig trial_config = config;
    if (config.jobs > 1) trial_config.threads = 1;  // trials own the parallelism

    parallel_for(0, rows, [&](std::size_t i) {
        const std::size_t si = i / config.trials;
        const std::uint64_t row_seed = derive_seed(config.seed, i);
        try {
            results[i] = run_trial(row_seed, config.snr_list[si], trial_config);
        } catch (const std::exception& e) {
            throw DataError("trial " + std::to_string(i % config.trials) + " at snr " +
                            fmt_num(config.snr_list[si]) + " dB failed: " + e.what());
        }
        std::fprintf(stderr, "experiment: trial %zu/%zu done (snr %s dB)\n",
                     i % config.trials + 1, std::size_t(config.trials),
                     fmt_num(config.snr_list[si]).c_str());
    }, config.jobs);

    std::string csv =
        "scenario_seed,snr_db,auc_prior,auc_refined,sisnr_in,sisnr_out_sc,sisnr_out_mc,"
        "sisnr_out_crm,sisnr_out_sc_raw,sisnr_out_mc_raw\n";
    auto append_row = [&csv](const std::string& seed_col, const TrialMetrics& m) {
        csv += seed_col;
        for (double v : {m.snr_db, m.auc_prior, m.auc_refined, m.sisnr_in, m.sisnr_out_sc,
                         m.sisnr_out_mc, m.sisnr_out_crm, m.sisnr_out_sc_raw,
                         m.sisnr_out_mc_raw}) {
            csv += ',';
            csv += fmt_num(v);
        }
        csv += '\n';
    };
    for (const TrialMetrics& m : results) append_row(std::to_string(m.scenario_seed), m);

    // per-SNR means appended after the trial rows
    for (std::size_t si = 0; si < config.snr_list.size(); ++si) {
        TrialMetrics mean;
        mean.snr_db = config.snr_list[si];
        for (std::size_t ti = 0; ti < config.trials; ++ti) {
            const TrialMetrics& m = results[si * config.trials + ti];
            mean.auc_prior += m.auc_prior;
            mean.auc_refined += m.auc_refined;
            mean.sisnr_in += m.sisnr_in;
            mean.sisnr_out_sc += m.sisnr_out_sc;
            mean.sisnr_out_mc += m.sisnr_out_mc;
            mean.sisnr_out_crm += m.sisnr_out_crm;
            mean.sisnr_out_sc_raw += m.sisnr_out_sc_raw;
            mean.sisnr_out_mc_raw += m.sisnr_out_mc_raw;
        }
        const double n = double(config.trials);
        mean.auc_prior /= n;
        mean.auc_refined /= n;
        mean.sisnr_in /= n;
        mean.sisnr_out_sc /= n;
        mean.sisnr_out_mc /= n;
        mean.sisnr_out_crm /= n;
        mean.sisnr_out_sc_raw /= n;
        mean.sisnr_out_mc_raw /= n;
        append_row("mean", mean);
    }

    const std::string metrics_path = config.out_dir + "/metrics.csv";
    {
        std::ofstream os(metrics_path);
        if (!os) throw DataError("cannot open for writing: " + metrics_path);
        os << csv;
        if (!os) throw DataError("failed writing metrics CSV: " + metrics_path);
    }

    for (std::size_t si = 0; si < config.snr_list.size(); ++si) {
        std::vector<RocCurve> prior, refined;
        for (std::size_t ti = 0; ti < config.trials; ++ti) {
            prior.push_back(results[si * config.trials + ti].roc_prior);
            refined.push_back(results[si * config.trials + ti].roc_refined);
        }
        const std::string tag = fmt_num(config.snr_list[si]);
        write_roc_csv(config.out_dir + "/roc_prior_snr_" + tag + ".csv",
                      averaged_roc(prior));
        write_roc_csv(config.out_dir + "/roc_refined_snr_" + tag + ".csv",
                      averaged_roc(refined));
    }
    std::fprintf(stderr, "experiment: wrote %s\n", metrics_path.c_str());
}

void cmd_simulate(const PipelineConfig& config) {
    Scenario scenario;
    if (!config.scenario_file.empty()) {
        scenario = read_scenario_file(config.scenario_file);
    } else {
        ScenarioRanges ranges;
        ranges.snr_db = config.snr_list.front();
        ranges.sample_rate = config.sample_rate;
        ranges.duration_s = config.duration_s;
        scenario = sample_scenario(ranges, config.seed);
    }
    const MixResult mix = synthesize_scene(scenario, config.reference_channel);

    std::filesystem::create_directories(config.out_dir);
    write_wav(config.out_dir + "/mixture.wav", mix.mixture);
    write_wav(config.out_dir + "/speech_image.wav", mix.speech_image);
    write_wav(config.out_dir + "/noise_image.wav", mix.noise_image);
    write_scenario_file(config.out_dir + "/scenario.txt", scenario);
    std::fprintf(stderr, "simulate: wrote mixture + components to %s\n",
                 config.out_dir.c_str());
}

void cmd_enhance(const PipelineConfig& config) {
    if (config.input_wav.empty()) throw DataError("enhance requires an input WAV");
    if (config.output_wav.empty()) throw DataError("enhance requires an output path");
    if (config.mask_files.empty()) throw DataError("enhance requires at least one mask file");

    const Waveform input = read_wav(config.input_wav);
    const std::size_t window = config.window_samples(input.sample_rate);
    const std::size_t hop = config.hop_samples(input.sample_rate);
    const MultichannelSpectrogram Y = stft(input, config.fft_size, window, hop);
    const std::size_t channels = Y.channels;

    // Assemble the mask input: either one pooled real mask, or a complex
    // per-channel mask tensor (real files are taken as real-valued filters).
    bool pooled = false;
    RealMask pooled_mask;
    ComplexMask H;
    if (config.mask_files.size() == 1) {
        AnyMask any = read_mask_file(config.mask_files.front());
        if (std::holds_alternative<RealMask>(any)) {
            RealMask& mask = std::get<RealMask>(any);
            if (mask.channels == 1) {
                pooled = true;
                pooled_mask = std::move(mask);
            } else if (mask.channels == channels) {
                H = ComplexMask(mask.frames, mask.bins, mask.channels);
                for (std::size_t i = 0; i < mask.values.size(); ++i) {
                    H.values[i] = cdouble(mask.values[i], 0.0);
                }
            } else {
                throw DataError("mask channel count does not match the input WAV");
            }
        } else {
            H = std::move(std::get<ComplexMask>(any));
            if (H.channels != channels)
                throw DataError("mask channel count does not match the input WAV");
        }
    } else {
        if (config.mask_files.size() != channels)
            throw DataError("expected one mask file per channel (" +
                            std::to_string(channels) + "), got " +
                            std::to_string(config.mask_files.size()));
        for (std::size_t m = 0; m < channels; ++m) {
            AnyMask any = read_mask_file(config.mask_files[m]);
            const std::size_t frames = std::holds_alternative<RealMask>(any)
                                           ? std::get<RealMask>(any).frames
                                           : std::get<ComplexMask>(any).frames;
            const std::size_t bins = std::holds_alternative<RealMask>(any)
                                         ? std::get<RealMask>(any).bins
                                         : std::get<ComplexMask>(any).bins;
            if (m == 0) H = ComplexMask(frames, bins, channels);
            if (frames != H.frames || bins != H.bins)
                throw DataError("mask files disagree on shape");
            if (std::holds_alternative<RealMask>(any)) {
                const RealMask& mask = std::get<RealMask>(any);
                if (mask.channels != 1) throw DataError("per-channel mask files must be (t, f)");
                for (std::size_t t = 0; t < frames; ++t)
                    for (std::size_t f = 0; f < bins; ++f)
                        H.at(t, f, m) = cdouble(mask.at(t, f), 0.0);
            } else {
                const ComplexMask& mask = std::get<ComplexMask>(any);
                if (mask.channels != 1) throw DataError("per-channel mask files must be (t, f)");
                for (std::size_t t = 0; t < frames; ++t)
                    for (std::size_t f = 0; f < bins; ++f) H.at(t, f, m) = mask.at(t, f);
            }
        }
    }

    MultichannelSpectrogram xi;
    RealMask alpha_s;
    if (pooled) {
        if (pooled_mask.frames != Y.frames || pooled_mask.bins != Y.bins)
            throw DataError("pooled mask shape does not match the spectrogram (" +
                            std::to_string(pooled_mask.frames) + "x" +
                            std::to_string(pooled_mask.bins) + " vs " +
                            std::to_string(Y.frames) + "x" + std::to_string(Y.bins) + ")");
        alpha_s = pooled_mask;
    } else {
        if (H.frames != Y.frames || H.bins != Y.bins)
            throw DataError("mask shape does not match the spectrogram");
        xi = apply_complex_mask(Y, H);
        alpha_s = median_pool(energetic_mask(Y, xi));
    }
    const RealMask alpha_n = complement_mask(alpha_s);

    const std::size_t ref = config.reference_channel;
    if (ref >= channels) throw DataError("reference channel out of range");
    const ArrayGeometry geometry =
        channels == 6 ? nested_array_geometry() : ArrayGeometry{};

    MultichannelSpectrogram out_spec;
    RealMask used_mask = alpha_s;
    std::vector<double> loglik;
    std::vector<std::string> warnings;

    const bool refine_masks = !config.skip_refinement;
    switch (config.mode) {
        case FilterMode::crm: {
            out_spec = single_channel_like(Y);
            for (std::size_t t = 0; t < Y.frames; ++t) {
                for (std::size_t f = 0; f < Y.bins; ++f) {
                    out_spec.at(t, f, 0) = pooled ? pooled_mask.at(t, f) * Y.at(t, f, ref)
                                                  : xi.at(t, f, ref);
                }
            }
            break;
        }
        case FilterMode::sc: {
            RealMask lambda_s = alpha_s;
            if (refine_masks) {
                PipelineProducts products =
                    run_pipeline(Y, alpha_s, alpha_n, geometry, config, true, false);
                lambda_s = std::move(products.lambda_s);
                loglik = std::move(products.loglik);
                warnings = std::move(products.warnings);
            }
            out_spec = single_channel_like(Y);
            for (std::size_t t = 0; t < Y.frames; ++t) {
                for (std::size_t f = 0; f < Y.bins; ++f) {
                    const double g =
                        std::max(std::sqrt(lambda_s.at(t, f)), config.gain_floor);
                    out_spec.at(t, f, 0) = g * Y.at(t, f, ref);
                }
            }
            used_mask = std::move(lambda_s);
            break;
        }
        case FilterMode::mc: {
            PipelineProducts products =
                run_pipeline(Y, alpha_s, alpha_n, geometry, config, refine_masks, true);
            out_spec = std::move(products.enhanced);
            used_mask = std::move(products.lambda_s);
            loglik = std::move(products.loglik);
            warnings = std::move(products.warnings);
            break;
        }
    }
    for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    Waveform out = istft(out_spec);
    // pad to the input duration
    Waveform padded(1, input.samples, input.sample_rate);
    const std::size_t n = std::min(out.samples, input.samples);
    std::copy_n(out.channel(0).begin(), n, padded.channel(0).begin());
    write_wav(config.output_wav, padded);

    if (!config.dump_mask.empty()) write_mask_file(config.dump_mask, used_mask);
    if (!config.loglik_csv.empty()) {
        if (loglik.empty())
            std::fprintf(stderr, "warning: no EM run, log-likelihood CSV not written\n");
        else
            write_loglik_csv(config.loglik_csv, loglik);
    }
    std::fprintf(stderr, "enhance: wrote %s\n", config.output_wav.c_str());
}

}  // namespace maskbeam
