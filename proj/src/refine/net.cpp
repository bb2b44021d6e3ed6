#include "specstat/refine/net.hpp"

#include <fstream>

#include <json.hpp>

namespace specstat::refine {

ChannelStats compute_channel_stats(const std::vector<TrainSample>& dataset) {
    require(!dataset.empty(), "EmptyInput", "cannot compute statistics of an empty dataset");
    const int ch = dataset.front().input.ch;
    ChannelStats stats;
    stats.mean.assign(static_cast<std::size_t>(ch), 0.0);
    stats.stddev.assign(static_cast<std::size_t>(ch), 0.0);

    std::vector<double> sum(static_cast<std::size_t>(ch), 0.0),
        sum_sq(static_cast<std::size_t>(ch), 0.0);
    std::size_t count = 0;
    for (const auto& sample : dataset) {
        require(sample.input.ch == ch, "DimensionMismatch", "inconsistent channel counts");
        for (int c = 0; c < ch; ++c) {
            const float* p = sample.input.plane(c);
            for (std::size_t i = 0; i < sample.input.plane_size(); ++i) {
                sum[static_cast<std::size_t>(c)] += p[i];
                sum_sq[static_cast<std::size_t>(c)] += static_cast<double>(p[i]) * p[i];
            }
        }
        count += sample.input.plane_size();
    }
    for (int c = 0; c < ch; ++c) {
        const double m = sum[static_cast<std::size_t>(c)] / static_cast<double>(count);
        const double var = sum_sq[static_cast<std::size_t>(c)] / static_cast<double>(count) - m * m;
        stats.mean[static_cast<std::size_t>(c)] = m;
        stats.stddev[static_cast<std::size_t>(c)] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return stats;
}

void normalize(Tensor<float>& input, const ChannelStats& stats) {
    require(static_cast<std::size_t>(input.ch) == stats.mean.size(), "DimensionMismatch",
            "normalization statistics do not match channel count");
    for (int c = 0; c < input.ch; ++c) {
        const float m = static_cast<float>(stats.mean[static_cast<std::size_t>(c)]);
        const float inv = static_cast<float>(1.0 / stats.stddev[static_cast<std::size_t>(c)]);
        float* p = input.plane(c);
        for (std::size_t i = 0; i < input.plane_size(); ++i)
            p[i] = (p[i] - m) * inv;
    }
}

namespace {

struct AdamState {
    std::vector<float> m, v;
};

} // namespace

TrainResult train(InputConfig config, const TrainSpec& spec, std::vector<TrainSample> dataset,
                  std::array<int, 3> channels) {
    require(!dataset.empty(), "EmptyInput", "training dataset is empty");
    const int in_ch = channel_count(config);
    for (const auto& s : dataset) {
        require(s.input.ch == in_ch, "DimensionMismatch",
                "dataset channel count does not match the input config");
        require(s.target.ch == 3 && s.target.h == s.input.h && s.target.w == s.input.w,
                "DimensionMismatch", "target must be 3 channels at input resolution");
    }

    TrainResult result;
    result.model.config = config;
    result.model.channels = channels;
    result.model.norm = compute_channel_stats(dataset);
    result.model.net.build(in_ch, channels, spec.seed);

    for (auto& sample : dataset)
        normalize(sample.input, result.model.norm);

    auto& net = result.model.net;
    auto convs = net.named_convs();
    std::vector<AdamState> adam(convs.size());
    for (std::size_t i = 0; i < convs.size(); ++i) {
        adam[i].m.assign(convs[i].second->w.size() + convs[i].second->b.size(), 0.0f);
        adam[i].v.assign(adam[i].m.size(), 0.0f);
    }

    const std::size_t n = dataset.size();
    const std::size_t batch = std::max<std::size_t>(1, static_cast<std::size_t>(spec.batch));
    std::size_t step = 0;

    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            const float inv_batch = 1.0f / static_cast<float>(stop - start);
            net.zero_grad();
            for (std::size_t i = start; i < stop; ++i) {
                Tensor<float> probs = net.forward(dataset[i].input);
                auto loss = soft_dice_loss(probs, dataset[i].target);
                if (!std::isfinite(loss.value))
                    fail("Divergence",
                         "training loss became non-finite at epoch " + std::to_string(epoch));
                epoch_loss += loss.value;
                for (auto& g : loss.grad.data)
                    g *= inv_batch;
                net.backward(loss.grad);
            }
            // Adam with bias correction, one update per batch
            ++step;
            const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(step));
            const float lr = static_cast<float>(spec.learning_rate);
            for (std::size_t ci = 0; ci < convs.size(); ++ci) {
                Conv<float>& conv = *convs[ci].second;
                auto update = [&](std::vector<float>& param, std::vector<float>& grad,
                                  std::size_t offset) {
                    for (std::size_t j = 0; j < param.size(); ++j) {
                        float& m = adam[ci].m[offset + j];
                        float& v = adam[ci].v[offset + j];
                        const float g = grad[j];
                        m = static_cast<float>(spec.beta1) * m + (1.0f - static_cast<float>(spec.beta1)) * g;
                        v = static_cast<float>(spec.beta2) * v + (1.0f - static_cast<float>(spec.beta2)) * g * g;
                        const double mhat = m / bc1;
                        const double vhat = v / bc2;
                        param[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + spec.eps));
                    }
                };
                update(conv.w, conv.gw, 0);
                update(conv.b, conv.gb, conv.w.size());
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

Tensor<float> infer(Model& model, const Tensor<float>& raw_input) {
    Tensor<float> input = raw_input;
    normalize(input, model.norm);
    return model.net.forward(input);
}

std::vector<core::LabelMap> binarize(const Tensor<float>& probs, double threshold) {
    require(probs.ch == 3, "DimensionMismatch", "binarize expects 3 probability channels");
    std::vector<core::LabelMap> maps;
    for (int c = 0; c < 3; ++c) {
        core::LabelMap m = core::LabelMap::empty(core::kForegroundClasses[c], probs.h, probs.w);
        const float* p = probs.plane(c);
        for (std::size_t i = 0; i < probs.plane_size(); ++i)
            m.mask[i] = p[i] >= threshold ? 1 : 0;
        maps.push_back(std::move(m));
    }
    return maps;
}

void save_model(Model& model, const std::filesystem::path& path) {
    nlohmann::json header;
    header["format"] = "specstat-model";
    header["version"] = 1;
    header["input_config"] = to_string(model.config);
    header["in_channels"] = channel_count(model.config);
    header["channels"] = model.channels;
    header["normalization"] = {{"mean", model.norm.mean}, {"std", model.norm.stddev}};
    header["parameter_count"] = model.parameter_count();

    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    auto convs = model.net.named_convs();
    for (auto& [name, conv] : convs) {
        tensors.push_back({{"name", name + ".w"},
                           {"shape", {conv->out_ch, conv->in_ch, conv->ksize, conv->ksize}},
                           {"stride", conv->stride},
                           {"offset", offset},
                           {"count", conv->w.size()}});
        offset += conv->w.size();
        tensors.push_back(
            {{"name", name + ".b"}, {"shape", {conv->out_ch}}, {"offset", offset}, {"count", conv->b.size()}});
        offset += conv->b.size();
    }
    header["tensors"] = tensors;

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "IoFailure", "cannot open " + path.string() + " for writing");
    out << header.dump() << "\n";
    for (auto& [name, conv] : convs) {
        out.write(reinterpret_cast<const char*>(conv->w.data()),
                  static_cast<std::streamsize>(conv->w.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(conv->b.data()),
                  static_cast<std::streamsize>(conv->b.size() * sizeof(float)));
    }
    require(out.good(), "IoFailure", "write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "IoFailure", "cannot open " + path.string());
    std::string header_line;
    require(static_cast<bool>(std::getline(in, header_line)), "MalformedHeader",
            "model file has no header line");

    Model model;
    try {
        auto header = nlohmann::json::parse(header_line);
        require(header.at("format") == "specstat-model", "MalformedHeader",
                "not a model file: " + path.string());
        model.config = input_config_from_string(header.at("input_config").get<std::string>());
        auto chans = header.at("channels").get<std::vector<int>>();
        require(chans.size() == 3, "MalformedHeader", "model must have 3 channel levels");
        model.channels = {chans[0], chans[1], chans[2]};
        model.norm.mean = header.at("normalization").at("mean").get<std::vector<double>>();
        model.norm.stddev = header.at("normalization").at("std").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail("MalformedHeader", std::string("bad model header: ") + e.what());
    }

    model.net.build(channel_count(model.config), model.channels, 0);
    for (auto& [name, conv] : model.net.named_convs()) {
        in.read(reinterpret_cast<char*>(conv->w.data()),
                static_cast<std::streamsize>(conv->w.size() * sizeof(float)));
        in.read(reinterpret_cast<char*>(conv->b.data()),
                static_cast<std::streamsize>(conv->b.size() * sizeof(float)));
        require(in.good(), "TruncatedPayload", "model payload shorter than the tensor directory");
    }
    return model;
}

} // namespace specstat::refine
