#include "inducer/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace inducer {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, std::size_t line)
{
    return source + ":" + std::to_string(line);
}

template <class T>
T parse_number(const std::string& key, const std::string& value, const std::string& loc)
{
    T out{};
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ConfigError(loc + ": " + key + " = '" + value + "' is not a valid number");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value, const std::string& loc)
{
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(loc + ": " + key + " = '" + value + "' is not a boolean");
}

const char* const kModeKeys[] = {"key_bottleneck", "value_bottleneck", "lora_rank", "adapter_bottleneck",
                                 "prefix_length"};

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace

TuningMode resolve_mode(const std::string& name, const std::map<std::string, std::size_t>& overrides)
{
    TuningMode mode;
    bool is_preset = false;
    for (const auto& p : TuningMode::preset_names()) is_preset |= p == name;
    if (is_preset) {
        mode = TuningMode::from_preset(name);
    } else if (const auto kind = parse_mode_kind(name)) {
        mode = TuningMode::default_for(*kind);
    } else {
        std::string valid;
        for (const auto& n : mode_kind_names()) valid += (valid.empty() ? "" : ", ") + n;
        for (const auto& n : TuningMode::preset_names())
            if (!parse_mode_kind(n)) valid += ", " + n;
        throw ConfigError("unknown mode '" + name + "'; valid modes: " + valid);
    }
    for (const auto& [key, value] : overrides) {
        std::optional<std::size_t>* field = nullptr;
        if (key == "key_bottleneck") field = &mode.key_bottleneck;
        else if (key == "value_bottleneck") field = &mode.value_bottleneck;
        else if (key == "lora_rank") field = &mode.lora_rank;
        else if (key == "adapter_bottleneck") field = &mode.adapter_bottleneck;
        else if (key == "prefix_length") field = &mode.prefix_length;
        else throw ConfigError("unknown mode hyperparameter '" + key + "'");
        if (*field != value) {
            *field = value;
            mode.preset.clear();
        }
    }
    mode.validate();
    return mode;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source)
{
    RunConfig cfg;
    std::map<std::string, std::pair<std::string, std::size_t>> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where(source, lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where(source, lineno) + ": empty key");
        if (!kv.emplace(key, std::make_pair(value, lineno)).second) {
            throw ConfigError(where(source, lineno) + ": duplicate key '" + key + "'");
        }
    }

    // Model preset first so explicit sizes override it.
    if (auto it = kv.find("model.preset"); it != kv.end()) {
        if (it->second.first != "custom") cfg.model = ModelConfig::from_preset(it->second.first);
        else cfg.model.preset = "custom";
    }
    std::string mode_name = "full";
    std::map<std::string, std::size_t> mode_overrides;
    bool train_seed_set = false;

    for (const auto& [key, entry] : kv) {
        const auto& [value, ln] = entry;
        const std::string loc = where(source, ln);
        auto size = [&] { return parse_number<std::size_t>(key, value, loc); };
        auto real = [&] { return parse_number<double>(key, value, loc); };

        if (key == "model.preset") continue;
        if (key.rfind("model.", 0) == 0) {
            const std::string k = key.substr(6);
            std::size_t* f = k == "layers"     ? &cfg.model.layers
                             : k == "heads"    ? &cfg.model.heads
                             : k == "head_dim" ? &cfg.model.head_dim
                             : k == "ffn_dim"  ? &cfg.model.ffn_dim
                             : k == "vocab"    ? &cfg.model.vocab
                             : k == "context"  ? &cfg.model.context
                                               : nullptr;
            if (!f) throw ConfigError(loc + ": unknown key '" + key + "'");
            *f = size();
        } else if (key == "mode.name") {
            mode_name = value;
        } else if (key.rfind("mode.", 0) == 0) {
            mode_overrides[key.substr(5)] = size();
        } else if (key == "task.kind") {
            cfg.task.kind = parse_task_kind(value);
        } else if (key == "task.vocab") {
            cfg.task.vocab = size();
        } else if (key == "task.length") {
            cfg.task.length = size();
        } else if (key == "task.pairs") {
            cfg.task.pairs = size();
        } else if (key == "task.train_size") {
            cfg.task.train_size = size();
        } else if (key == "task.val_size") {
            cfg.task.val_size = size();
        } else if (key == "task.test_size") {
            cfg.task.test_size = size();
        } else if (key == "task.seed") {
            cfg.task.seed = parse_number<std::uint64_t>(key, value, loc);
        } else if (key == "train.optimizer") {
            cfg.train.optimizer = parse_optimizer(value);
        } else if (key == "train.lr") {
            cfg.train.lr = real();
        } else if (key == "train.beta1") {
            cfg.train.beta1 = real();
        } else if (key == "train.beta2") {
            cfg.train.beta2 = real();
        } else if (key == "train.eps") {
            cfg.train.eps = real();
        } else if (key == "train.weight_decay") {
            cfg.train.weight_decay = real();
        } else if (key == "train.batch_size") {
            cfg.train.batch_size = size();
        } else if (key == "train.steps") {
            cfg.train.steps = size();
        } else if (key == "train.warmup") {
            cfg.train.warmup = size();
        } else if (key == "train.clip") {
            cfg.train.clip = real();
        } else if (key == "train.eval_every") {
            cfg.train.eval_every = size();
        } else if (key == "train.eval_split") {
            cfg.train.eval_split = parse_split(value);
        } else if (key == "train.seed") {
            cfg.train.seed = parse_number<std::uint64_t>(key, value, loc);
            train_seed_set = true;
        } else if (key == "train.wall_clock") {
            cfg.train.wall_clock = parse_bool(key, value, loc);
        } else if (key == "run.seed") {
            cfg.seed = parse_number<std::uint64_t>(key, value, loc);
        } else if (key == "run.out_dir") {
            cfg.out_dir = value;
        } else if (key.rfind("ablate.", 0) == 0) {
            cfg.ablate[key.substr(7)] = value;
        } else {
            throw ConfigError(loc + ": unknown key '" + key + "'");
        }
    }
    if (!train_seed_set) cfg.train.seed = cfg.seed;
    cfg.mode = resolve_mode(mode_name, mode_overrides);
    cfg.model.validate();
    cfg.task.validate();
    cfg.train.validate();
    if (cfg.task.vocab > cfg.model.vocab) {
        throw ConfigError(source + ": task vocab " + std::to_string(cfg.task.vocab) + " exceeds model vocab " +
                          std::to_string(cfg.model.vocab));
    }
    if (cfg.task.input_length() > cfg.model.context) {
        throw ConfigError(source + ": task inputs of " + std::to_string(cfg.task.input_length()) +
                          " tokens exceed model context " + std::to_string(cfg.model.context));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void RunConfig::set_seed(std::uint64_t s)
{
    seed = s;
    train.seed = s;
}

std::string RunConfig::serialize() const
{
    std::ostringstream o;
    o << "model.preset = " << model.preset << "\n"
      << "model.layers = " << model.layers << "\n"
      << "model.heads = " << model.heads << "\n"
      << "model.head_dim = " << model.head_dim << "\n"
      << "model.ffn_dim = " << model.ffn() << "\n"
      << "model.vocab = " << model.vocab << "\n"
      << "model.context = " << model.context << "\n\n";

    o << "mode.name = " << mode.name() << "\n";
    const std::optional<std::size_t>* fields[] = {&mode.key_bottleneck, &mode.value_bottleneck, &mode.lora_rank,
                                                  &mode.adapter_bottleneck, &mode.prefix_length};
    for (std::size_t i = 0; i < 5; ++i)
        if (*fields[i]) o << "mode." << kModeKeys[i] << " = " << **fields[i] << "\n";
    o << "\n";

    o << "task.kind = " << task_kind_name(task.kind) << "\n"
      << "task.vocab = " << task.vocab << "\n"
      << "task.length = " << task.length << "\n";
    if (task.pairs) o << "task.pairs = " << task.pairs << "\n";
    o << "task.train_size = " << task.train_size << "\n"
      << "task.val_size = " << task.val_size << "\n"
      << "task.test_size = " << task.test_size << "\n"
      << "task.seed = " << task.seed << "\n\n";

    o << "train.optimizer = " << optimizer_name(train.optimizer) << "\n"
      << "train.lr = " << fmt(train.lr) << "\n"
      << "train.beta1 = " << fmt(train.beta1) << "\n"
      << "train.beta2 = " << fmt(train.beta2) << "\n"
      << "train.eps = " << fmt(train.eps) << "\n"
      << "train.weight_decay = " << fmt(train.weight_decay) << "\n"
      << "train.batch_size = " << train.batch_size << "\n"
      << "train.steps = " << train.steps << "\n"
      << "train.warmup = " << train.warmup << "\n"
      << "train.clip = " << fmt(train.clip) << "\n"
      << "train.eval_every = " << train.eval_every << "\n"
      << "train.eval_split = " << split_name(train.eval_split) << "\n"
      << "train.seed = " << train.seed << "\n"
      << "train.wall_clock = " << (train.wall_clock ? "true" : "false") << "\n\n";

    o << "run.seed = " << seed << "\n"
      << "run.out_dir = " << out_dir << "\n";
    if (!ablate.empty()) {
        o << "\n";
        for (const auto& [k, v] : ablate) o << "ablate." << k << " = " << v << "\n";
    }
    return o.str();
}

}  // namespace inducer
