#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gdk/dataset.hpp"
#include "gdk/loss.hpp"
#include "gdk/network.hpp"
#include "gdk/network_config.hpp"
#include "gdk/sgd.hpp"

namespace gdk {

/// Plain-text key=value run settings:
///   lr momentum gamma batch iterations seed save_every w_box w_giou w_obj w_noobj w_class
struct RunConfig {
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double gamma = 0.95;
    std::uint64_t batch_size = 32;
    std::uint64_t iterations = 10000;
    std::uint64_t seed = 0;
    std::uint64_t save_every = 0;  // 0: checkpoints only at the end
    LossWeights weights;
};

RunConfig parse_run_config(std::string_view text, const std::string& source = "<run>");
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_text(const RunConfig& run);

struct TrainOptions {
    std::filesystem::path out_dir;
    /// Continue from out_dir/final.gdk up to RunConfig::iterations total.
    bool resume = false;
    /// Called after every iteration with the 1-based iteration and its batch loss.
    std::function<void(std::uint64_t, const LossBreakdown&)> on_iteration;
};

struct TrainResult {
    std::uint64_t start_iteration = 0;
    std::uint64_t end_iteration = 0;
    std::vector<LossBreakdown> history;  // this call's iterations only
    double best_loss = 0.0;
    std::filesystem::path final_checkpoint;
    std::filesystem::path best_checkpoint;
    std::filesystem::path metrics_log;
};

/// Image indices of the mini-batch for 0-based iteration t. Shuffled epochs drawn from `seed`;
/// with fewer samples than the batch size, indices are drawn with replacement.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t iteration, std::size_t batch_size,
                                       std::size_t dataset_size);

/// Mini-batch momentum SGD on `samples`. Writes into out_dir:
///   final.gdk    weights, optimizer velocities and iteration counter
///   best.gdk     weights with the lowest batch loss seen
///   metrics.csv  "iteration,lr_multiplier,total,box_mse,giou_term,confidence_term,class_term" per line
///   network.cfg  the network description
TrainResult train(const NetworkConfig& config, std::span<const Sample> samples, const RunConfig& run,
                  const TrainOptions& options);

/// Loads weights saved by train (or any checkpoint holding every parameter).
Network<float> load_network(const NetworkConfig& config, const std::filesystem::path& checkpoint);

/// Reads the training images resized to the network input, as [1, C, S, S] tensors.
std::vector<Tensor> load_training_images(std::span<const Sample> samples, std::size_t input_size);

}  // namespace gdk
