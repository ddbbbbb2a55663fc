#include "cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gdk/augment.hpp"
#include "gdk/dataset.hpp"
#include "gdk/error.hpp"
#include "gdk/evaluation.hpp"
#include "gdk/network.hpp"
#include "gdk/network_config.hpp"
#include "gdk/trainer.hpp"

namespace gdk::cli {
namespace fs = std::filesystem;

namespace {

NetworkConfig config_for(const std::string& config, const fs::path& weights) {
    if (!config.empty()) return resolve_network_config(config);
    const fs::path beside = weights.parent_path() / "network.cfg";
    if (!fs::exists(beside))
        throw UsageError("no --config given and " + beside.string() + " does not exist");
    return load_network_config(beside);
}

std::vector<Sample> select_split(const DatasetManifest& manifest, const std::string& split) {
    if (split == "all") return manifest.samples;
    if (manifest.split.empty())
        throw UsageError("dataset " + manifest.root.string() + " has no split.txt; use --split all or run 'gdk split'");
    return manifest.subset(split == "train" ? SplitTag::Train : SplitTag::Test);
}

DatasetManifest load_checked(const fs::path& root, std::ostream& err) {
    std::vector<std::string> warnings;
    DatasetManifest manifest = load_dataset(root, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    return manifest;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Grid detector kit: synthetic data, augmentation, training, detection and evaluation", "gdk"};
    app.require_subcommand(1);

    // generate
    std::size_t gen_n = 8, gen_size = 112;
    std::uint64_t gen_seed = 0;
    double gen_margin = 0.0;
    std::string gen_out;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset of ellipse 'polyps'");
    generate->add_option("--n", gen_n, "Number of images")->capture_default_str();
    generate->add_option("--size", gen_size, "Image side in pixels")->capture_default_str();
    generate->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    generate->add_option("--margin", gen_margin, "Border fraction kept free of polyps")
        ->check(CLI::Range(0.0, 0.25))
        ->capture_default_str();
    generate->add_option("--out", gen_out, "Output dataset directory")->required();

    // split
    std::string split_data;
    double split_fraction = 0.8;
    std::uint64_t split_seed = 0;
    auto* split = app.add_subcommand("split", "Write a seeded train/test split.txt into a dataset");
    split->add_option("--data", split_data, "Dataset directory")->required();
    split->add_option("--fraction", split_fraction, "Training fraction")->capture_default_str();
    split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();

    // import
    std::string imp_root;
    auto* import_cmd = app.add_subcommand("import", "Turn <root>/masks into label files, one box per connected region");
    import_cmd->add_option("--root", imp_root, "Dataset directory with images/ and masks/")->required();

    // augment
    std::string aug_in, aug_out, aug_recipe;
    std::uint64_t aug_seed = 0;
    auto* augment = app.add_subcommand("augment", "Expand a dataset into the original plus ten variants per image");
    augment->add_option("--in", aug_in, "Input dataset directory")->required();
    augment->add_option("--out", aug_out, "Output dataset directory")->required();
    augment->add_option("--recipe", aug_recipe, "key=value recipe file (defaults when omitted)");
    augment->add_option("--seed", aug_seed, "Noise seed")->capture_default_str();

    // train
    std::string train_data, train_config = "preset:desk", train_run, train_out, train_split = "auto";
    bool train_resume = false;
    std::size_t train_log_every = 100;
    auto* train_cmd = app.add_subcommand("train", "Train a detector with momentum SGD");
    train_cmd->add_option("--data", train_data, "Dataset directory")->required();
    train_cmd->add_option("--config", train_config, "Network config file or preset:default / preset:desk")
        ->capture_default_str();
    train_cmd->add_option("--run", train_run, "Run config file (key=value)")->required();
    train_cmd->add_option("--out", train_out, "Output directory for checkpoints and metrics")->required();
    train_cmd->add_option("--split", train_split, "Samples to train on: auto, train or all")
        ->check(CLI::IsMember({"auto", "train", "all"}))
        ->capture_default_str();
    train_cmd->add_flag("--resume", train_resume, "Continue from <out>/final.gdk");
    train_cmd->add_option("--log-every", train_log_every, "Progress line interval on stderr (0 disables)")
        ->capture_default_str();

    // detect
    std::string det_weights, det_image, det_config;
    double det_conf = 0.25, det_nms = 0.45;
    auto* detect_cmd = app.add_subcommand("detect", "Print detections for one image: class conf cx cy w h");
    detect_cmd->add_option("--weights", det_weights, "Checkpoint file")->required();
    detect_cmd->add_option("--image", det_image, "P6 image")->required();
    detect_cmd->add_option("--config", det_config, "Network config (default: network.cfg beside the weights)");
    detect_cmd->add_option("--conf", det_conf, "Confidence threshold")->capture_default_str();
    detect_cmd->add_option("--nms", det_nms, "NMS IoU threshold")->capture_default_str();

    // evaluate
    std::string ev_weights, ev_data, ev_config, ev_split = "test";
    double ev_conf = 0.25, ev_nms = 0.45;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Count TP/TN/FP/FN by centroid matching and print metrics");
    evaluate_cmd->add_option("--weights", ev_weights, "Checkpoint file")->required();
    evaluate_cmd->add_option("--data", ev_data, "Dataset directory")->required();
    evaluate_cmd->add_option("--split", ev_split, "train, test or all")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    evaluate_cmd->add_option("--config", ev_config, "Network config (default: network.cfg beside the weights)");
    evaluate_cmd->add_option("--conf", ev_conf, "Confidence threshold")->capture_default_str();
    evaluate_cmd->add_option("--nms", ev_nms, "NMS IoU threshold")->capture_default_str();

    // metrics
    std::uint64_t m_tp = 0, m_fp = 0, m_fn = 0, m_tn = 0;
    auto* metrics = app.add_subcommand("metrics", "Compute Pre, Sen, F1, F2 and Dice from counts");
    metrics->add_option("--tp", m_tp, "True positives")->required();
    metrics->add_option("--fp", m_fp, "False positives")->required();
    metrics->add_option("--fn", m_fn, "False negatives")->required();
    metrics->add_option("--tn", m_tn, "True negatives")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kValidation;
    }

    try {
        if (generate->parsed()) {
            if (gen_n == 0) throw ValidationError("--n must be positive");
            const DatasetManifest m = generate_synthetic(gen_out, SyntheticOptions{gen_n, gen_size, gen_seed, gen_margin});
            out << "generated " << m.samples.size() << " samples in " << gen_out << '\n';
        } else if (split->parsed()) {
            DatasetManifest m = split_dataset(load_checked(split_data, err), split_fraction, split_seed);
            write_split_manifest(fs::path(split_data) / "split.txt", m);
            out << "train " << m.subset(SplitTag::Train).size() << " test " << m.subset(SplitTag::Test).size() << '\n';
        } else if (import_cmd->parsed()) {
            std::vector<std::string> warnings;
            const DatasetManifest m = import_etis(imp_root, &warnings);
            for (const auto& w : warnings) err << "warning: " << w << '\n';
            std::size_t boxes = 0;
            for (const Sample& sample : m.samples) boxes += sample.boxes.size();
            out << "imported " << m.samples.size() << " samples with " << boxes << " boxes\n";
        } else if (augment->parsed()) {
            const AugmentRecipe recipe = aug_recipe.empty() ? AugmentRecipe{} : load_recipe(aug_recipe);
            const AugmentSummary s = augment_dataset(aug_in, aug_out, recipe, aug_seed);
            for (const auto& w : s.warnings) err << "warning: " << w << '\n';
            out << "manifest " << s.manifest.string() << '\n'
                << "outputs " << s.outputs << " from " << s.processed << " inputs (skipped inputs " << s.skipped_inputs
                << ", skipped variants " << s.skipped_variants << ")\n";
        } else if (train_cmd->parsed()) {
            const NetworkConfig config = resolve_network_config(train_config);
            const RunConfig run = load_run_config(train_run);
            const DatasetManifest manifest = load_checked(train_data, err);
            const std::string which = train_split == "auto" ? (manifest.split.empty() ? "all" : "train") : train_split;
            const std::vector<Sample> samples = select_split(manifest, which);
            TrainOptions options;
            options.out_dir = train_out;
            options.resume = train_resume;
            if (train_log_every > 0) {
                options.on_iteration = [&](std::uint64_t it, const LossBreakdown& l) {
                    if (it % train_log_every == 0) err << "iteration " << it << " loss " << l.total << '\n';
                };
            }
            const TrainResult r = train(config, samples, run, options);
            out << "iterations " << r.start_iteration << " -> " << r.end_iteration << '\n';
            if (!r.history.empty()) out << "final loss " << std::setprecision(8) << r.history.back().total << '\n';
            out << "checkpoint " << r.final_checkpoint.string() << '\n'
                << "metrics " << r.metrics_log.string() << '\n';
        } else if (detect_cmd->parsed()) {
            const NetworkConfig config = config_for(det_config, det_weights);
            const Network<float> net = load_network(config, det_weights);
            const Image image = resize_bilinear(load_image(det_image), config.input_size, config.input_size);
            const std::vector<BBox> boxes = detect(net, image_to_tensor<float>(image), det_conf, det_nms);
            out << std::fixed << std::setprecision(6);
            for (const BBox& b : boxes)
                out << b.class_id << ' ' << b.confidence << ' ' << b.cx << ' ' << b.cy << ' ' << b.w << ' ' << b.h
                    << '\n';
        } else if (evaluate_cmd->parsed()) {
            const NetworkConfig config = config_for(ev_config, ev_weights);
            const Network<float> net = load_network(config, ev_weights);
            const DatasetManifest manifest = load_checked(ev_data, err);
            const std::vector<Sample> samples = select_split(manifest, ev_split);
            if (samples.empty()) throw UsageError("split '" + ev_split + "' is empty");
            const ConfusionCounts counts = evaluate<float>(net, samples, EvaluationOptions{ev_conf, ev_nms});
            out << metric_report(counts);
        } else if (metrics->parsed()) {
            out << metric_report(ConfusionCounts{m_tp, m_tn, m_fp, m_fn});
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kSuccess;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"gdk"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gdk::cli
