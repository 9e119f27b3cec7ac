// maskbeam_main.cpp
// CLI: enhance recorded audio with supplied masks, run seeded synthetic
// experiments, or synthesize mixtures. Progress and warnings go to stderr;
// data goes to files. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "maskbeam/kernels.hpp"
#include "maskbeam/pipeline.hpp"

namespace {

struct CommonFlags {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> snr_db;
    std::optional<unsigned> trials;
    std::string mode;
    bool skip_refinement = false;
    std::optional<unsigned> em_iters;
    bool no_rank1 = false;
    std::string subarray;
    std::optional<std::string> out_dir;
    std::optional<unsigned> jobs;
    std::optional<double> corruption;
    std::optional<unsigned> threads;
    std::optional<double> duration_s;
    std::optional<double> gain_floor;
    std::optional<std::size_t> reference_channel;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key = value config file");
    cmd->add_option("--seed", flags.seed, "master random seed");
    cmd->add_option("--snr-db", flags.snr_db, "single SNR in dB (overrides the SNR list)");
    cmd->add_option("--trials", flags.trials, "trials per SNR");
    cmd->add_option("--mode", flags.mode, "filter mode")
        ->check(CLI::IsMember({"crm", "sc", "mc"}));
    cmd->add_flag("--skip-refinement", flags.skip_refinement,
                  "use the pooled priors directly, no EM refinement");
    cmd->add_option("--em-iters", flags.em_iters, "EM iterations");
    cmd->add_flag("--no-rank1", flags.no_rank1, "disable the rank-1 source approximation");
    cmd->add_option("--subarray", flags.subarray, "sub-array band split")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--jobs", flags.jobs, "parallel trials");
    cmd->add_option("--corruption", flags.corruption, "logit-noise level for oracle masks");
    cmd->add_option("--threads", flags.threads, "threads for per-frequency work");
    cmd->add_option("--duration", flags.duration_s, "utterance duration in seconds");
    cmd->add_option("--gain-floor", flags.gain_floor, "post-filter minimum gain");
    cmd->add_option("--ref-channel", flags.reference_channel, "reference channel index");
}

maskbeam::PipelineConfig build_config(const CommonFlags& flags) {
    maskbeam::ConfigOverrides overrides;
    overrides.seed = flags.seed;
    overrides.snr_db = flags.snr_db;
    overrides.trials = flags.trials;
    if (flags.mode == "crm") overrides.mode = maskbeam::FilterMode::crm;
    else if (flags.mode == "sc") overrides.mode = maskbeam::FilterMode::sc;
    else if (flags.mode == "mc") overrides.mode = maskbeam::FilterMode::mc;
    if (flags.skip_refinement) overrides.skip_refinement = true;
    overrides.em_iters = flags.em_iters;
    if (flags.no_rank1) overrides.rank1 = false;
    if (flags.subarray == "on") overrides.subarray = true;
    else if (flags.subarray == "off") overrides.subarray = false;
    overrides.out_dir = flags.out_dir;
    overrides.jobs = flags.jobs;
    overrides.corruption = flags.corruption;
    overrides.threads = flags.threads;
    overrides.duration_s = flags.duration_s;
    overrides.gain_floor = flags.gain_floor;
    overrides.reference_channel = flags.reference_channel;
    return maskbeam::resolve_config(flags.config_path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CGMM mask refinement and multi-channel Wiener filtering"};
    app.require_subcommand(1);

    CommonFlags enhance_flags, experiment_flags, simulate_flags;
    std::string input_wav, output_wav, dump_mask, loglik_csv, scenario_file;
    std::vector<std::string> mask_files;

    CLI::App* enhance = app.add_subcommand("enhance", "filter a recording with mask files");
    add_common_flags(enhance, enhance_flags);
    enhance->add_option("--input,-i", input_wav, "multichannel input WAV")->required();
    enhance->add_option("--mask,-m", mask_files,
                        "MCMF mask file (repeat per channel, or one pooled mask)")
        ->required();
    enhance->add_option("--output,-o", output_wav, "enhanced WAV path")->required();
    enhance->add_option("--dump-mask", dump_mask, "write the final mask as MCMF");
    enhance->add_option("--loglik-csv", loglik_csv, "write per-iteration log-likelihood CSV");

    CLI::App* experiment =
        app.add_subcommand("experiment", "seeded synthetic trials with metric reports");
    add_common_flags(experiment, experiment_flags);

    CLI::App* simulate = app.add_subcommand("simulate", "synthesize a mixture and components");
    add_common_flags(simulate, simulate_flags);
    simulate->add_option("--scenario", scenario_file, "reuse an existing scenario file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        std::fprintf(stderr, "maskbeam: kernels %s\n",
                     maskbeam::kernels::isa_name(maskbeam::kernels::active_isa()));
        if (enhance->parsed()) {
            maskbeam::PipelineConfig config = build_config(enhance_flags);
            config.input_wav = input_wav;
            config.mask_files = mask_files;
            config.output_wav = output_wav;
            config.dump_mask = dump_mask;
            config.loglik_csv = loglik_csv;
            maskbeam::cmd_enhance(config);
        } else if (experiment->parsed()) {
            maskbeam::cmd_experiment(build_config(experiment_flags));
        } else if (simulate->parsed()) {
            maskbeam::PipelineConfig config = build_config(simulate_flags);
            config.scenario_file = scenario_file;
            maskbeam::cmd_simulate(config);
        }
    } catch (const maskbeam::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const maskbeam::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
