#include "drugsent/config.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "data.train_file",
        "data.test_file",
        "data.fraction",
        "data.seed",
        "data.on_bad_row",
        "model.kind",
        "model.checkpoint_id",
        "model.embeddings_file",
        "model.filters_per_width",
        "model.filter_widths",
        "model.hidden_size",
        "model.max_len",
        "model.trainable_encoder_layers",
        "model.freeze_embeddings",
        "model.dropout",
        "model.seed",
        "train.epochs_max",
        "train.batch_size",
        "train.learning_rate",
        "train.early_stop_patience",
        "train.validation_fraction",
        "train.seed",
        "output.dir",
    };
    return keys;
}

class KeyValues {
  public:
    KeyValues(std::map<std::string, std::string> kv, std::string origin)
        : kv_(std::move(kv)), origin_(std::move(origin)) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    int integer(const std::string& key, int fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        auto v = parse_integer_like(it->second);
        if (!v) bad(key, it->second, "an integer");
        return *v;
    }

    std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            bad(key, it->second, "a non-negative integer");
        }
        return fallback;
    }

    double real(const std::string& key, double fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            bad(key, it->second, "a number");
        }
        return fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        const std::string v = to_lower(it->second);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        bad(key, it->second, "true or false");
        return fallback;
    }

    [[noreturn]] void bad(const std::string& key, const std::string& value,
                          const std::string& expected) {
        throw UsageError(origin_ + ": key " + key + ": expected " + expected +
                         ", found \"" + value + "\"");
    }

  private:
    std::map<std::string, std::string> kv_;
    std::string origin_;
};

std::vector<int> parse_widths(const std::string& csv,
                              const std::string& origin) {
    std::vector<int> out;
    for (const std::string& part : split(csv, ',')) {
        auto v = parse_integer_like(trim(part));
        if (!v) {
            throw UsageError(origin +
                             ": key model.filter_widths: expected a "
                             "comma-separated integer list, found \"" +
                             csv + "\"");
        }
        out.push_back(*v);
    }
    return out;
}

std::string widths_to_csv(const std::vector<int>& widths) {
    std::vector<std::string> parts;
    parts.reserve(widths.size());
    for (int w : widths) parts.push_back(std::to_string(w));
    return join(parts, ",");
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string default_checkpoint_id(ModelKind kind) {
    switch (kind) {
    case ModelKind::FinetuneClinical: return "bio-clinical-bert";
    case ModelKind::FinetuneGeneral:
    case ModelKind::FrozenEncoderHead:
        return "bert-base-cased";
    case ModelKind::CnnStatic: return "";
    }
    return "";
}

} // namespace

RunConfig parse_config(const std::filesystem::path& path) {
    const std::string origin = path.string();
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    for (const std::string& raw_line : split(read_file(path), '\n')) {
        ++line_no;
        const std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(origin + ": line " + std::to_string(line_no) +
                             ": expected \"key = value\"");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!known_keys().count(key)) {
            throw UsageError(origin + ": unknown key \"" + key + "\"");
        }
        if (!kv.emplace(key, value).second) {
            throw UsageError(origin + ": duplicate key \"" + key + "\"");
        }
    }

    KeyValues values(kv, origin);
    if (!values.has("model.kind")) {
        throw UsageError(origin + ": missing required key model.kind");
    }

    RunConfig config;
    config.model.kind = model_kind_from_string(values.str("model.kind", ""));
    const ModelKind kind = config.model.kind;

    config.train_file = values.str("data.train_file", "");
    config.test_file = values.str("data.test_file", "");
    config.fraction = values.real("data.fraction", 1.0);
    if (!(config.fraction > 0.0) || config.fraction > 1.0) {
        values.bad("data.fraction", format_real(config.fraction),
                   "a fraction in (0,1]");
    }
    config.data_seed = values.unsigned64("data.seed", 42);
    const std::string policy = values.str("data.on_bad_row", "abort");
    if (policy == "abort") config.on_bad_row = BadRowPolicy::Abort;
    else if (policy == "skip") config.on_bad_row = BadRowPolicy::Skip;
    else values.bad("data.on_bad_row", policy, "abort or skip");

    config.model.checkpoint_id =
        values.str("model.checkpoint_id", default_checkpoint_id(kind));
    config.embeddings_file = values.str("model.embeddings_file", "");
    config.model.filters_per_width =
        values.integer("model.filters_per_width", 100);
    if (values.has("model.filter_widths")) {
        config.model.filter_widths =
            parse_widths(values.str("model.filter_widths", ""), origin);
    }
    config.model.hidden_size = values.integer("model.hidden_size", 100);
    config.model.max_len = values.integer("model.max_len", 128);
    config.model.trainable_encoder_layers = values.integer(
        "model.trainable_encoder_layers",
        kind == ModelKind::FrozenEncoderHead ? 0 : 4);
    config.model.freeze_embeddings =
        values.boolean("model.freeze_embeddings", false);
    config.model.dropout = values.real("model.dropout", 0.0);
    config.model.seed = values.unsigned64("model.seed", 42);
    config.model.validate();

    config.train.epochs_max =
        values.integer("train.epochs_max", default_epochs_max(kind));
    config.train.batch_size = values.integer("train.batch_size", 32);
    config.train.learning_rate =
        values.real("train.learning_rate", default_learning_rate(kind));
    config.train.early_stop_patience =
        values.integer("train.early_stop_patience", 3);
    config.train.validation_fraction =
        values.real("train.validation_fraction", 0.1);
    config.train.seed = values.unsigned64("train.seed", 42);
    config.train.validate();

    config.output_dir = values.str("output.dir", "");
    return config;
}

std::string render_config(const RunConfig& config) {
    std::ostringstream out;
    out << "# resolved run configuration\n";
    out << "data.train_file = " << config.train_file << "\n";
    out << "data.test_file = " << config.test_file << "\n";
    out << "data.fraction = " << format_real(config.fraction) << "\n";
    out << "data.seed = " << config.data_seed << "\n";
    out << "data.on_bad_row = "
        << (config.on_bad_row == BadRowPolicy::Abort ? "abort" : "skip")
        << "\n";
    out << "model.kind = " << to_string(config.model.kind) << "\n";
    out << "model.checkpoint_id = " << config.model.checkpoint_id << "\n";
    out << "model.embeddings_file = " << config.embeddings_file << "\n";
    out << "model.filters_per_width = " << config.model.filters_per_width
        << "\n";
    out << "model.filter_widths = " << widths_to_csv(config.model.filter_widths)
        << "\n";
    out << "model.hidden_size = " << config.model.hidden_size << "\n";
    out << "model.max_len = " << config.model.max_len << "\n";
    out << "model.trainable_encoder_layers = "
        << config.model.trainable_encoder_layers << "\n";
    out << "model.freeze_embeddings = "
        << (config.model.freeze_embeddings ? "true" : "false") << "\n";
    out << "model.dropout = " << format_real(config.model.dropout) << "\n";
    out << "model.seed = " << config.model.seed << "\n";
    out << "train.epochs_max = " << config.train.epochs_max << "\n";
    out << "train.batch_size = " << config.train.batch_size << "\n";
    out << "train.learning_rate = " << format_real(config.train.learning_rate)
        << "\n";
    out << "train.early_stop_patience = " << config.train.early_stop_patience
        << "\n";
    out << "train.validation_fraction = "
        << format_real(config.train.validation_fraction) << "\n";
    out << "train.seed = " << config.train.seed << "\n";
    out << "output.dir = " << config.output_dir << "\n";
    return out.str();
}

void write_resolved_config(const RunConfig& config,
                           const std::filesystem::path& path) {
    write_file(path, render_config(config));
}

} // namespace drugsent
