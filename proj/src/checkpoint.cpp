#include "inducer/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace inducer {

namespace {

using nlohmann::ordered_json;

constexpr char kMagic[8] = {'I', 'N', 'D', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T value)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    Reader(std::string bytes, std::string where) : bytes_(std::move(bytes)), where_(std::move(where)) {}

    template <class T>
    T get(const char* what)
    {
        T value;
        std::memcpy(&value, take(sizeof(T), what), sizeof(T));
        return value;
    }

    std::string str(std::size_t n, const char* what) { return std::string(take(n, what), n); }

    const char* take(std::size_t n, const char* what)
    {
        if (bytes_.size() - pos_ < n) {
            throw CheckpointError(where_ + ": truncated file while reading " + what + " at byte " +
                                  std::to_string(pos_));
        }
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string bytes_;
    std::string where_;
    std::size_t pos_ = 0;
};

ordered_json mode_to_json(const TuningMode& m)
{
    ordered_json j;
    j["kind"] = std::string(mode_kind_name(m.kind));
    if (m.key_bottleneck) j["key_bottleneck"] = *m.key_bottleneck;
    if (m.value_bottleneck) j["value_bottleneck"] = *m.value_bottleneck;
    if (m.lora_rank) j["lora_rank"] = *m.lora_rank;
    if (m.adapter_bottleneck) j["adapter_bottleneck"] = *m.adapter_bottleneck;
    if (m.prefix_length) j["prefix_length"] = *m.prefix_length;
    j["preset"] = m.preset;
    return j;
}

TuningMode mode_from_json(const ordered_json& j)
{
    TuningMode m;
    const auto kind = parse_mode_kind(j.at("kind").get<std::string>());
    if (!kind) throw CheckpointError("checkpoint header names unknown mode '" + j.at("kind").get<std::string>() + "'");
    m.kind = *kind;
    auto opt = [&](const char* key, std::optional<std::size_t>& field) {
        if (j.contains(key)) field = j.at(key).get<std::size_t>();
    };
    opt("key_bottleneck", m.key_bottleneck);
    opt("value_bottleneck", m.value_bottleneck);
    opt("lora_rank", m.lora_rank);
    opt("adapter_bottleneck", m.adapter_bottleneck);
    opt("prefix_length", m.prefix_length);
    m.preset = j.value("preset", std::string());
    m.validate();
    return m;
}

ordered_json config_to_json(const ModelConfig& c)
{
    ordered_json j;
    j["preset"] = c.preset;
    j["layers"] = c.layers;
    j["heads"] = c.heads;
    j["head_dim"] = c.head_dim;
    j["ffn_dim"] = c.ffn();
    j["vocab"] = c.vocab;
    j["context"] = c.context;
    return j;
}

ModelConfig config_from_json(const ordered_json& j)
{
    ModelConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.head_dim = j.at("head_dim").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.vocab = j.at("vocab").get<std::size_t>();
    c.context = j.at("context").get<std::size_t>();
    c.validate();
    return c;
}

struct Record {
    std::string name;
    bool frozen;
    Shape shape;
    std::vector<double> data;
};

struct Parsed {
    CheckpointHeader header;
    std::vector<Record> records;
};

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Parsed parse(const std::filesystem::path& path, bool header_only)
{
    Reader r(read_file(path), path.string());
    if (std::memcmp(r.take(sizeof(kMagic), "magic"), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError(path.string() + ": not a checkpoint file (bad magic)");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": version mismatch (file " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = r.get<std::uint32_t>("header length");
    Parsed out;
    try {
        const auto j = ordered_json::parse(r.str(header_len, "header"));
        out.header.config = config_from_json(j.at("config"));
        out.header.mode = mode_from_json(j.at("mode"));
        out.header.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": malformed header: " + e.what());
    }
    if (header_only) return out;

    const auto count = r.get<std::uint32_t>("record count");
    for (std::uint32_t i = 0; i < count; ++i) {
        Record rec;
        rec.name = r.str(r.get<std::uint32_t>("name length"), "name");
        rec.frozen = r.get<std::uint8_t>("frozen flag") != 0;
        const auto rank = r.get<std::uint32_t>("rank");
        for (std::uint32_t k = 0; k < rank; ++k) rec.shape.push_back(r.get<std::uint64_t>("dimension"));
        const std::size_t n = shape_numel(rec.shape);
        rec.data.resize(n);
        std::memcpy(rec.data.data(), r.take(n * sizeof(double), "tensor data"), n * sizeof(double));
        out.records.push_back(std::move(rec));
    }
    if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes after the last record");
    return out;
}

void restore(Model& model, const std::vector<Record>& records, const std::string& where)
{
    auto& store = model.params();
    std::set<std::string> file_names, model_names;
    for (const auto& rec : records) file_names.insert(rec.name);
    for (const auto& name : store.names()) model_names.insert(name);
    if (file_names != model_names) {
        std::vector<std::string> missing, extra;
        std::set_difference(model_names.begin(), model_names.end(), file_names.begin(), file_names.end(),
                            std::back_inserter(missing));
        std::set_difference(file_names.begin(), file_names.end(), model_names.begin(), model_names.end(),
                            std::back_inserter(extra));
        std::string msg = where + ": name-set mismatch;";
        if (!missing.empty()) msg += " missing from file: " + missing.front() + (missing.size() > 1 ? " (+" + std::to_string(missing.size() - 1) + " more)" : "") + ";";
        if (!extra.empty()) msg += " not in model: " + extra.front() + (extra.size() > 1 ? " (+" + std::to_string(extra.size() - 1) + " more)" : "");
        throw CheckpointError(msg);
    }
    for (const auto& rec : records) {
        Tensor t = store.get(rec.name);
        if (t.shape() != rec.shape) {
            throw CheckpointError(where + ": shape mismatch for " + rec.name + ": file " + shape_to_string(rec.shape) +
                                  ", model " + shape_to_string(t.shape()));
        }
        std::copy(rec.data.begin(), rec.data.end(), t.mutable_data().begin());
        store.set_frozen(rec.name, rec.frozen);
    }
}

}  // namespace

std::string serialize_checkpoint(const Model& model)
{
    ordered_json header;
    header["config"] = config_to_json(model.config());
    header["mode"] = mode_to_json(model.mode());
    header["seed"] = model.seed();
    const std::string header_text = header.dump();

    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    const auto& entries = model.params().entries();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        put<std::uint8_t>(out, e.frozen ? 1 : 0);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
        for (auto dim : e.tensor.shape()) put<std::uint64_t>(out, dim);
        const auto data = e.tensor.data();
        out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
    }
    return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path)
{
    const std::string bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path)
{
    return parse(path, true).header;
}

Model load_checkpoint(const std::filesystem::path& path)
{
    auto parsed = parse(path, false);
    Model model(parsed.header.config, parsed.header.mode, parsed.header.seed);
    restore(model, parsed.records, path.string());
    return model;
}

void load_checkpoint_into(Model& model, const std::filesystem::path& path)
{
    const auto parsed = parse(path, false);
    restore(model, parsed.records, path.string());
}

}  // namespace inducer
