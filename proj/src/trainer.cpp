#include "drugsent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "drugsent/errors.hpp"
#include "drugsent/metrics.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
    if (epochs_max < 1) throw UsageError("epochs_max must be >= 1");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) {
        throw UsageError("learning_rate must be positive");
    }
    if (early_stop_patience < 0) {
        throw UsageError("early_stop_patience must be >= 0");
    }
    if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
        throw UsageError("validation_fraction must be in [0,1)");
    }
}

int default_epochs_max(ModelKind kind) {
    switch (kind) {
    case ModelKind::CnnStatic: return 18;
    case ModelKind::FinetuneGeneral: return 8;
    case ModelKind::FinetuneClinical: return 11;
    case ModelKind::FrozenEncoderHead: return 18;
    }
    return 10;
}

double default_learning_rate(ModelKind kind) {
    switch (kind) {
    case ModelKind::FinetuneGeneral:
    case ModelKind::FinetuneClinical:
        return 2e-5;
    case ModelKind::CnnStatic:
    case ModelKind::FrozenEncoderHead:
        return 1e-3;
    }
    return 1e-3;
}

void set_global_seed(std::uint64_t seed) { nn::global_rng().seed(seed); }

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

namespace {

class Adam {
  public:
    Adam(std::vector<Parameter>& params, double lr)
        : params_(params), lr_(lr) {
        for (const Parameter& p : params_) {
            m_.emplace_back(p.var.value().shape(), 0.0);
            v_.emplace_back(p.var.value().shape(), 0.0);
        }
    }

    void zero_grad() {
        for (Parameter& p : params_) p.var.zero_grad();
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, t_);
        const double bc2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter& p = params_[i];
            if (!p.var.requires_grad() || !p.var.has_grad()) continue;
            Tensor& value = p.var.value();
            const Tensor& grad = p.var.grad();
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < value.numel(); ++j) {
                const double g = grad[j];
                m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g;
                v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g * g;
                value[j] -= lr_ * (m[j] / bc1) /
                            (std::sqrt(v[j] / bc2) + kEps);
            }
        }
    }

  private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    std::vector<Parameter>& params_;
    double lr_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

double mean_loss(Model& model, const std::vector<EncodedExample>& examples,
                 std::size_t batch_size) {
    nn::NoGradGuard no_grad;
    double total = 0.0;
    for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
        const std::size_t end = std::min(examples.size(), begin + batch_size);
        EncodedBatch batch = make_batch(examples, begin, end);
        Var logits = model.logits(batch, /*training=*/false, nullptr);
        Var loss = nn::cross_entropy_mean(logits, batch.labels);
        total += loss.value()[0] * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(examples.size());
}

double validation_macro_f1(Model& model,
                           const std::vector<EncodedExample>& examples,
                           std::size_t batch_size) {
    std::vector<int> gold;
    gold.reserve(examples.size());
    for (const auto& ex : examples) gold.push_back(static_cast<int>(ex.label));
    const std::vector<int> pred = predict_classes(model, examples, batch_size);
    return macro_prf(per_class_prf(confusion_matrix(gold, pred))).f1;
}

} // namespace

TrainHistory train(Model& model, const std::vector<EncodedExample>& examples,
                   const TrainConfig& config) {
    config.validate();
    if (examples.empty()) {
        throw TrainError("training set is empty");
    }

    // Carve a stratified validation split when requested.
    std::vector<EncodedExample> train_set;
    std::vector<EncodedExample> val_set;
    if (config.validation_fraction > 0.0) {
        std::vector<int> labels;
        labels.reserve(examples.size());
        for (const auto& ex : examples) {
            labels.push_back(static_cast<int>(ex.label));
        }
        const auto val_indices = stratified_sample_indices(
            labels, config.validation_fraction, config.seed);
        std::vector<bool> in_val(examples.size(), false);
        for (std::size_t i : val_indices) in_val[i] = true;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            (in_val[i] ? val_set : train_set).push_back(examples[i]);
        }
        if (val_set.empty()) {
            train_set = examples; // floors were all zero
        }
    } else {
        train_set = examples;
    }
    if (train_set.empty()) {
        throw TrainError("validation split consumed every example");
    }
    const bool has_validation = !val_set.empty();
    const auto batch_size = static_cast<std::size_t>(config.batch_size);

    Adam optimizer(model.params(), config.learning_rate);
    std::mt19937_64 rng(config.seed);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    // Snapshot of trainable parameters at the best validation epoch.
    std::vector<Tensor> best_params;
    auto snapshot = [&]() {
        best_params.clear();
        for (const Parameter& p : model.params()) {
            if (p.var.requires_grad()) best_params.push_back(p.var.value());
        }
    };
    auto restore = [&]() {
        std::size_t k = 0;
        for (Parameter& p : model.params()) {
            if (p.var.requires_grad()) p.var.value() = best_params[k++];
        }
    };

    TrainHistory history;
    double best_f1 = -1.0;
    int epochs_without_improvement = 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (int epoch = 1; epoch <= config.epochs_max; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += batch_size) {
            const std::size_t end =
                std::min(order.size(), begin + batch_size);
            std::vector<EncodedExample> batch_examples;
            batch_examples.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                batch_examples.push_back(train_set[order[i]]);
            }
            EncodedBatch batch =
                make_batch(batch_examples, 0, batch_examples.size());
            optimizer.zero_grad();
            Var logits = model.logits(batch, /*training=*/true, &rng);
            Var loss = nn::cross_entropy_mean(logits, batch.labels);
            const double loss_value = loss.value()[0];
            if (!std::isfinite(loss_value)) {
                throw TrainError(
                    "non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch starting at example " + std::to_string(begin) +
                    " (lr=" + std::to_string(config.learning_rate) + ")");
            }
            nn::backward(loss);
            optimizer.step();
            epoch_loss += loss_value * static_cast<double>(end - begin);
            seen += end - begin;
        }

        EpochRecord record;
        record.train_loss = epoch_loss / static_cast<double>(seen);
        if (has_validation) {
            record.val_loss = mean_loss(model, val_set, batch_size);
            record.val_macro_f1 =
                validation_macro_f1(model, val_set, batch_size);
        } else {
            record.val_loss = nan;
            record.val_macro_f1 = nan;
        }
        history.epochs.push_back(record);
        history.stopped_epoch = epoch;

        if (has_validation) {
            if (record.val_macro_f1 > best_f1) {
                best_f1 = record.val_macro_f1;
                history.best_epoch = epoch;
                snapshot();
                epochs_without_improvement = 0;
            } else {
                ++epochs_without_improvement;
                if (config.early_stop_patience > 0 &&
                    epochs_without_improvement >= config.early_stop_patience) {
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
        }
    }

    if (has_validation && !best_params.empty()) {
        restore();
    }
    return history;
}

void write_history(const TrainHistory& history,
                   const std::filesystem::path& path) {
    std::ostringstream out;
    out << "epoch\ttrain_loss\tval_loss\tval_macro_f1\n";
    char buf[128];
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        const EpochRecord& r = history.epochs[i];
        std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\n", i + 1,
                      r.train_loss, r.val_loss, r.val_macro_f1);
        out << buf;
    }
    out << "stopped_epoch\t" << history.stopped_epoch << "\n";
    out << "best_epoch\t" << history.best_epoch << "\n";
    write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string widths_csv(const std::vector<int>& widths) {
    std::vector<std::string> parts;
    parts.reserve(widths.size());
    for (int w : widths) parts.push_back(std::to_string(w));
    return join(parts, ",");
}

std::vector<int> widths_from_csv(const std::string& csv) {
    std::vector<int> out;
    for (const std::string& part : split(csv, ',')) {
        auto v = parse_integer_like(part);
        if (!v) throw DataError("bad filter width list: \"" + csv + "\"");
        out.push_back(*v);
    }
    return out;
}

} // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir,
                     const TrainConfig& train_config, int epochs_run,
                     const std::string& data_fingerprint) {
    std::filesystem::create_directories(dir);
    const ModelConfig& mc = model.config();
    std::ostringstream m;
    m << "format=drugsent-checkpoint-1\n";
    m << "kind=" << to_string(mc.kind) << "\n";
    m << "checkpoint_id=" << mc.checkpoint_id << "\n";
    m << "seed=" << mc.seed << "\n";
    m << "max_len=" << mc.max_len << "\n";
    m << "hidden_size=" << mc.hidden_size << "\n";
    m << "num_classes=" << mc.num_classes << "\n";
    m << "filters_per_width=" << mc.filters_per_width << "\n";
    m << "filter_widths=" << widths_csv(mc.filter_widths) << "\n";
    m << "embedding_dim=" << mc.embedding_dim << "\n";
    m << "freeze_embeddings=" << (mc.freeze_embeddings ? 1 : 0) << "\n";
    m << "dropout=" << format_double(mc.dropout) << "\n";
    m << "trainable_encoder_layers=" << mc.trainable_encoder_layers << "\n";
    m << "train.epochs_max=" << train_config.epochs_max << "\n";
    m << "train.batch_size=" << train_config.batch_size << "\n";
    m << "train.learning_rate=" << format_double(train_config.learning_rate)
      << "\n";
    m << "train.early_stop_patience=" << train_config.early_stop_patience
      << "\n";
    m << "train.validation_fraction="
      << format_double(train_config.validation_fraction) << "\n";
    m << "train.seed=" << train_config.seed << "\n";
    m << "epochs_run=" << epochs_run << "\n";
    m << "data_fingerprint=" << data_fingerprint << "\n";
    write_file(dir / "manifest.txt", m.str());
    write_weights(dir / "weights.bin", model.params());
    model.save_assets(dir);
}

CheckpointManifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.txt";
    std::map<std::string, std::string> kv;
    for (const std::string& line : split(read_file(path), '\n')) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw DataError(path.string() + ": bad manifest line: " + t);
        }
        kv[t.substr(0, eq)] = t.substr(eq + 1);
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw DataError(path.string() + ": missing manifest key " + key);
        }
        return it->second;
    };
    auto need_int = [&](const std::string& key) {
        auto v = parse_integer_like(need(key));
        if (!v) throw DataError(path.string() + ": bad integer for " + key);
        return *v;
    };
    if (need("format") != "drugsent-checkpoint-1") {
        throw DataError(path.string() + ": unknown checkpoint format");
    }
    CheckpointManifest out;
    out.model.kind = model_kind_from_string(need("kind"));
    out.model.checkpoint_id = need("checkpoint_id");
    out.model.seed = static_cast<std::uint64_t>(
        std::stoull(need("seed")));
    out.model.max_len = need_int("max_len");
    out.model.hidden_size = need_int("hidden_size");
    out.model.num_classes = need_int("num_classes");
    out.model.filters_per_width = need_int("filters_per_width");
    out.model.filter_widths = widths_from_csv(need("filter_widths"));
    out.model.embedding_dim = need_int("embedding_dim");
    out.model.freeze_embeddings = need_int("freeze_embeddings") != 0;
    out.model.dropout = std::stod(need("dropout"));
    out.model.trainable_encoder_layers = need_int("trainable_encoder_layers");
    out.train.epochs_max = need_int("train.epochs_max");
    out.train.batch_size = need_int("train.batch_size");
    out.train.learning_rate = std::stod(need("train.learning_rate"));
    out.train.early_stop_patience = need_int("train.early_stop_patience");
    out.train.validation_fraction =
        std::stod(need("train.validation_fraction"));
    out.train.seed = static_cast<std::uint64_t>(
        std::stoull(need("train.seed")));
    out.epochs_run = need_int("epochs_run");
    out.data_fingerprint = need("data_fingerprint");
    return out;
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& dir) {
    const CheckpointManifest manifest = read_manifest(dir);
    std::unique_ptr<Model> model;
    if (manifest.model.kind == ModelKind::CnnStatic) {
        std::vector<std::string> tokens;
        for (const std::string& line :
             split(read_file(dir / "vocab.txt"), '\n')) {
            if (!line.empty()) tokens.push_back(line);
        }
        if (manifest.model.embedding_dim <= 0) {
            throw DataError(dir.string() +
                            ": manifest lacks a positive embedding_dim");
        }
        model = rebuild_cnn_skeleton(
            manifest.model, std::move(tokens),
            static_cast<std::size_t>(manifest.model.embedding_dim));
    } else {
        model = rebuild_encoder_skeleton(manifest.model, dir);
    }
    load_weights_into(model->params(), read_weights(dir / "weights.bin"),
                      dir.string());
    return model;
}

} // namespace drugsent
