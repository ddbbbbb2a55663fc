#include "gdk/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "gdk/checkpoint.hpp"
#include "gdk/error.hpp"
#include "gdk/image.hpp"

namespace gdk {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix(seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

// Largest integer a float holds exactly; the iteration counter is stored as f32.
constexpr std::uint64_t kMaxStoredIteration = 1ull << 24;

void write_metrics_line(std::ostream& out, std::uint64_t iteration, double multiplier, const LossBreakdown& l) {
    out << iteration << ',' << std::setprecision(10) << multiplier << ',' << l.total << ',' << l.box_mse << ','
        << l.giou_term << ',' << l.confidence_term << ',' << l.class_term << '\n';
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& source) {
    RunConfig run;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_no, "expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw ParseError(source, line_no, "value for '" + key + "' is not a number");
        }
        auto count = [&]() {
            if (v < 0.0 || v != std::floor(v)) throw ParseError(source, line_no, "'" + key + "' must be a non-negative integer");
            return static_cast<std::uint64_t>(v);
        };
        if (key == "lr") run.learning_rate = v;
        else if (key == "momentum") run.momentum = v;
        else if (key == "gamma") run.gamma = v;
        else if (key == "batch") run.batch_size = count();
        else if (key == "iterations") run.iterations = count();
        else if (key == "seed") run.seed = count();
        else if (key == "save_every") run.save_every = count();
        else if (key == "w_box") run.weights.box = v;
        else if (key == "w_giou") run.weights.giou = v;
        else if (key == "w_obj") run.weights.object = v;
        else if (key == "w_noobj") run.weights.no_object = v;
        else if (key == "w_class") run.weights.cls = v;
        else throw ParseError(source, line_no, "unknown run key '" + key + "'");
    }
    if (!(run.learning_rate >= 0.0)) throw ValidationError(source + ": lr must be non-negative");
    if (!(run.momentum >= 0.0 && run.momentum < 1.0)) throw ValidationError(source + ": momentum must lie in [0, 1)");
    if (!(run.gamma > 0.0 && run.gamma <= 1.0)) throw ValidationError(source + ": gamma must lie in (0, 1]");
    if (run.batch_size == 0) throw ValidationError(source + ": batch must be positive");
    if (run.iterations >= kMaxStoredIteration) throw ValidationError(source + ": iterations too large");
    for (double w : {run.weights.box, run.weights.giou, run.weights.object, run.weights.no_object, run.weights.cls})
        if (!(w >= 0.0)) throw ValidationError(source + ": loss weights must be non-negative");
    return run;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open run config: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), path.string());
}

std::string to_text(const RunConfig& run) {
    std::ostringstream out;
    out << std::setprecision(17) << "lr=" << run.learning_rate << "\nmomentum=" << run.momentum
        << "\ngamma=" << run.gamma << "\nbatch=" << run.batch_size << "\niterations=" << run.iterations
        << "\nseed=" << run.seed << "\nsave_every=" << run.save_every << "\nw_box=" << run.weights.box
        << "\nw_giou=" << run.weights.giou << "\nw_obj=" << run.weights.object << "\nw_noobj=" << run.weights.no_object
        << "\nw_class=" << run.weights.cls << '\n';
    return out.str();
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t iteration, std::size_t batch_size,
                                       std::size_t dataset_size) {
    if (dataset_size == 0 || batch_size == 0) throw UsageError("batch and dataset sizes must be positive");
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    if (dataset_size < batch_size) {
        std::mt19937_64 rng(mix(seed ^ 0x5DEECE66Dull, iteration));
        std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
        for (std::size_t i = 0; i < batch_size; ++i) out.push_back(pick(rng));
        return out;
    }
    std::uint64_t cached_epoch = ~0ull;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::uint64_t position = iteration * batch_size + i;
        const std::uint64_t epoch = position / dataset_size;
        if (epoch != cached_epoch) {
            order = epoch_order(seed, epoch, dataset_size);
            cached_epoch = epoch;
        }
        out.push_back(order[position % dataset_size]);
    }
    return out;
}

std::vector<Tensor> load_training_images(std::span<const Sample> samples, std::size_t input_size) {
    std::vector<Tensor> images;
    images.reserve(samples.size());
    for (const Sample& s : samples)
        images.push_back(image_to_tensor<float>(resize_bilinear(load_image(s.image), input_size, input_size)));
    return images;
}

Network<float> load_network(const NetworkConfig& config, const fs::path& checkpoint) {
    Network<float> net = Network<float>::build(config, 0);
    net.load_named_tensors(load_checkpoint(checkpoint));
    return net;
}

TrainResult train(const NetworkConfig& config, std::span<const Sample> samples, const RunConfig& run,
                  const TrainOptions& options) {
    if (samples.empty()) throw UsageError("training set is empty");
    if (options.out_dir.empty()) throw UsageError("training needs an output directory");
    fs::create_directories(options.out_dir);

    TrainResult result;
    result.final_checkpoint = options.out_dir / "final.gdk";
    result.best_checkpoint = options.out_dir / "best.gdk";
    result.metrics_log = options.out_dir / "metrics.csv";

    Network<float> net = Network<float>::build(config, run.seed);
    SgdOptions sgd_options{run.learning_rate, run.momentum, run.gamma, run.batch_size, samples.size()};
    SgdState<float> state = SgdState<float>::create(sgd_options, net.parameters());
    const std::vector<std::string>& names = net.parameter_names();

    // The best loss is kept at checkpoint precision so a resumed run compares exactly as an uninterrupted one.
    float best_loss = std::numeric_limits<float>::infinity();
    std::vector<Tensor> best_params = net.parameters();

    if (options.resume) {
        if (!fs::exists(result.final_checkpoint))
            throw UsageError("nothing to resume: " + result.final_checkpoint.string() + " does not exist");
        const std::vector<NamedTensor> saved = load_checkpoint(result.final_checkpoint);
        net.load_named_tensors(saved);
        for (std::size_t i = 0; i < names.size(); ++i) {
            const NamedTensor* v = find_tensor(saved, "velocity/" + names[i]);
            if (!v || v->value.shape() != state.velocities[i].shape())
                throw FormatError("checkpoint has no optimizer state for '" + names[i] + "'");
            state.velocities[i] = v->value;
        }
        const NamedTensor* it = find_tensor(saved, "state/iteration");
        const NamedTensor* best = find_tensor(saved, "state/best_loss");
        if (!it || !best) throw FormatError("checkpoint has no training state");
        state.iteration = static_cast<std::uint64_t>(it->value[0]);
        best_loss = best->value[0];
        if (fs::exists(result.best_checkpoint)) {
            Network<float> best_net = net;
            best_net.load_named_tensors(load_checkpoint(result.best_checkpoint));
            best_params = best_net.parameters();
        }
    } else {
        std::ofstream(result.metrics_log, std::ios::trunc);
    }
    {
        std::ofstream cfg(options.out_dir / "network.cfg", std::ios::trunc);
        cfg << to_text(config);
    }

    const std::vector<Tensor> images = load_training_images(samples, config.input_size);
    const std::size_t C = config.input_channels, S = config.input_size;

    auto save = [&](bool with_best) {
        std::vector<NamedTensor> tensors = net.to_named_tensors();
        for (std::size_t i = 0; i < names.size(); ++i)
            tensors.push_back({"velocity/" + names[i], state.velocities[i]});
        tensors.push_back({"state/iteration", Tensor({1}, {static_cast<float>(state.iteration)})});
        tensors.push_back({"state/best_loss", Tensor({1}, {best_loss})});
        save_checkpoint(result.final_checkpoint, tensors);
        if (with_best) {
            std::vector<NamedTensor> best;
            for (std::size_t i = 0; i < names.size(); ++i) best.push_back({names[i], best_params[i]});
            save_checkpoint(result.best_checkpoint, best);
        }
    };

    std::ofstream log(result.metrics_log, std::ios::app);
    if (!log) throw Error("cannot write metrics log: " + result.metrics_log.string());

    result.start_iteration = state.iteration;
    while (state.iteration < run.iterations) {
        const std::vector<std::size_t> picks = batch_indices(run.seed, state.iteration, run.batch_size, samples.size());
        Tensor batch({picks.size(), C, S, S});
        std::vector<std::vector<BBox>> targets;
        targets.reserve(picks.size());
        const std::size_t per_image = C * S * S;
        for (std::size_t i = 0; i < picks.size(); ++i) {
            std::copy_n(images[picks[i]].data().begin(), per_image, batch.data().begin() + static_cast<std::ptrdiff_t>(i * per_image));
            targets.push_back(samples[picks[i]].boxes);
        }

        Tape<float> tape;
        const Var raw = net.forward(tape, tape.constant(std::move(batch)));
        LossBreakdown loss;
        const Var total = detection_loss(tape, raw, targets, config, run.weights, &loss);
        std::vector<Tensor> grads = tape.backward(total);
        grads.resize(net.parameters().size(), Tensor({1}));
        for (std::size_t i = 0; i < grads.size(); ++i)
            if (grads[i].shape() != net.parameters()[i].shape()) grads[i] = Tensor(net.parameters()[i].shape());

        const double multiplier = lr_multiplier(state);
        if (static_cast<float>(loss.total) < best_loss) {
            best_loss = static_cast<float>(loss.total);
            best_params = net.parameters();
        }
        sgd_step<float>(state, net.parameters(), grads);

        write_metrics_line(log, state.iteration, multiplier, loss);
        result.history.push_back(loss);
        if (options.on_iteration) options.on_iteration(state.iteration, loss);
        if (run.save_every > 0 && state.iteration % run.save_every == 0 && state.iteration < run.iterations) {
            log.flush();
            save(true);
        }
    }
    log.flush();
    save(true);
    result.end_iteration = state.iteration;
    result.best_loss = best_loss;
    return result;
}

}  // namespace gdk
