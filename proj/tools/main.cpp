#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "inducer/checkpoint.hpp"
#include "inducer/run.hpp"
#include "inducer/verify.hpp"

using namespace inducer;
using nlohmann::ordered_json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool json = false;
};

double round2(double v)
{
    return std::round(v * 100.0) / 100.0;
}

std::string pct(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", v);
    return buf;
}

RunConfig load_config(const std::string& path, const Globals& g)
{
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
    RunConfig cfg = RunConfig::load(path);
    if (g.seed) cfg.set_seed(*g.seed);
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    return cfg;
}

ordered_json mode_json(const TuningMode& m)
{
    ordered_json j;
    j["name"] = m.name();
    j["kind"] = std::string(mode_kind_name(m.kind));
    if (m.key_bottleneck) j["key_bottleneck"] = *m.key_bottleneck;
    if (m.value_bottleneck) j["value_bottleneck"] = *m.value_bottleneck;
    if (m.lora_rank) j["lora_rank"] = *m.lora_rank;
    if (m.adapter_bottleneck) j["adapter_bottleneck"] = *m.adapter_bottleneck;
    if (m.prefix_length) j["prefix_length"] = *m.prefix_length;
    return j;
}

std::string mode_sizes(const TuningMode& m)
{
    std::string s;
    auto add = [&](const char* label, const std::optional<std::size_t>& v) {
        if (v) s += (s.empty() ? "" : ", ") + std::string(label) + " " + std::to_string(*v);
    };
    add("MLP_k", m.key_bottleneck);
    add("MLP_v", m.value_bottleneck);
    add("LoRA", m.lora_rank);
    add("FFN-adapter", m.adapter_bottleneck);
    add("prefix", m.prefix_length);
    return s.empty() ? "no added parameters" : s;
}

ordered_json record_json(const MetricsRecord& r)
{
    return ordered_json::parse(r.to_json());
}

int cmd_train(const std::string& config, const Globals& g)
{
    const RunConfig cfg = load_config(config, g);
    const auto records = execute_run(cfg, cfg.out_dir, [&](const MetricsRecord& r) {
        if (!g.json) {
            std::printf("step %5zu  loss %.4f  acc %.4f  em %.4f\n", r.step, r.loss, r.acc, r.em);
            std::fflush(stdout);
        }
    });
    if (g.json) {
        ordered_json j;
        j["out_dir"] = cfg.out_dir;
        j["mode"] = mode_json(cfg.mode);
        j["final"] = record_json(records.back());
        std::cout << j.dump() << "\n";
    } else {
        std::printf("wrote %s/{config.cfg,metrics.jsonl,checkpoint.bin}\n", cfg.out_dir.c_str());
    }
    return 0;
}

int cmd_eval(const std::string& config, std::string checkpoint, const std::string& split, const Globals& g)
{
    const RunConfig cfg = load_config(config, g);
    if (checkpoint.empty()) checkpoint = (std::filesystem::path(cfg.out_dir) / "checkpoint.bin").string();
    const Model model = load_checkpoint(checkpoint);
    const Split s = parse_split(split);
    const auto result = evaluate(model, make_task(cfg.task), s);
    if (g.json) {
        ordered_json j;
        j["checkpoint"] = checkpoint;
        j["split"] = split;
        j["mode"] = mode_json(model.mode());
        j["acc"] = result.acc;
        j["em"] = result.em;
        j["tokens"] = result.tokens;
        j["examples"] = result.examples;
        std::cout << j.dump() << "\n";
    } else {
        std::printf("%s on %s split: acc %.4f  em %.4f  (%zu tokens, %zu examples)\n", model.mode().name().c_str(),
                    split.c_str(), result.acc, result.em, result.tokens, result.examples);
    }
    return 0;
}

struct CountArgs {
    std::string preset = "gpt2-small";
    std::string mode = "full";
    std::optional<std::size_t> l, r, rk, rv, ra;
    bool published = false;
};

int cmd_count(const CountArgs& a, const Globals& g)
{
    std::map<std::string, std::size_t> overrides;
    if (a.l) overrides["prefix_length"] = *a.l;
    if (a.r) overrides["lora_rank"] = *a.r;
    if (a.rk) overrides["key_bottleneck"] = *a.rk;
    if (a.rv) overrides["value_bottleneck"] = *a.rv;
    if (a.ra) overrides["adapter_bottleneck"] = *a.ra;
    if (a.published && !overrides.empty()) throw ConfigError("--published cannot be combined with explicit sizes");
    const TuningMode mode = resolve_mode(a.mode, overrides);
    const ModelConfig cfg = ModelConfig::from_preset(a.preset);
    const auto report = count_params(parameter_layout(cfg, mode), mode);
    if (g.json) {
        ordered_json j;
        j["preset"] = a.preset;
        j["mode"] = mode_json(mode);
        j["base_total"] = report.base_total;
        j["total"] = report.total;
        j["trainable"] = report.trainable;
        j["storable"] = report.storable;
        j["trainable_pct"] = round2(report.trainable_pct);
        j["storable_pct"] = round2(report.storable_pct);
        std::cout << j.dump() << "\n";
    } else {
        std::printf("model      %s\n", a.preset.c_str());
        std::printf("mode       %s (%s)\n", mode.name().c_str(), mode_sizes(mode).c_str());
        std::printf("total      %zu\n", report.total);
        std::printf("base       %zu\n", report.base_total);
        std::printf("trainable  %zu (%s)\n", report.trainable, pct(report.trainable_pct).c_str());
        std::printf("storable   %zu (%s)\n", report.storable, pct(report.storable_pct).c_str());
    }
    return 0;
}

int cmd_verify(const std::string& suite, const Globals& g)
{
    const auto results = run_verify_suite(suite, g.seed.value_or(1));
    bool ok = !results.empty();
    ordered_json arr = ordered_json::array();
    for (const auto& r : results) {
        ok &= r.passed;
        if (g.json) {
            ordered_json j;
            j["suite"] = r.suite;
            j["property"] = r.name;
            j["passed"] = r.passed;
            j["observed"] = r.observed;
            j["bound"] = r.bound;
            if (!r.detail.empty()) j["detail"] = r.detail;
            arr.push_back(j);
        } else {
            std::printf("%s  [%s] %s  observed %.3e (bound %.1e)%s%s\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(),
                        r.name.c_str(), r.observed, r.bound, r.detail.empty() ? "" : "  ", r.detail.c_str());
        }
    }
    if (g.json) {
        ordered_json j;
        j["suite"] = suite;
        j["passed"] = ok;
        j["results"] = arr;
        std::cout << j.dump() << "\n";
    } else {
        std::printf("%s: %zu properties, %s\n", suite.c_str(), results.size(), ok ? "all passed" : "FAILURES");
    }
    return ok ? 0 : 1;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_ablate(const std::string& config, const std::string& task, const std::string& modes_arg,
               const std::string& seeds_arg, const Globals& g)
{
    RunConfig cfg = load_config(config, g);
    if (!task.empty()) cfg.task.kind = parse_task_kind(task);
    const auto modes = split_list(modes_arg);
    std::vector<std::uint64_t> seeds;
    for (const auto& s : split_list(seeds_arg)) {
        try {
            seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
            throw ConfigError("seed '" + s + "' is not an integer");
        }
    }
    const std::filesystem::path out = cfg.out_dir;
    const auto table = run_ablation(cfg, modes, seeds, out, [&](const AblationRun& run) {
        if (g.json) return;
        if (run.final) {
            std::printf("%-14s seed %-4llu acc %.4f  em %.4f\n", run.mode.c_str(),
                        static_cast<unsigned long long>(run.seed), run.final->acc, run.final->em);
        } else {
            std::printf("%-14s seed %-4llu FAILED: %s\n", run.mode.c_str(), static_cast<unsigned long long>(run.seed),
                        run.error.c_str());
        }
        std::fflush(stdout);
    });
    const auto path = out / "ablation.tsv";
    std::ofstream(path, std::ios::binary | std::ios::trunc) << table.to_tsv();
    if (g.json) {
        ordered_json j;
        j["table"] = path.string();
        ordered_json rows = ordered_json::array();
        for (const auto& r : table.rows) {
            ordered_json row;
            row["mode"] = r.mode;
            row["trainable_pct"] = round2(r.trainable_pct);
            row["acc_mean"] = r.acc_mean;
            row["acc_sd"] = r.acc_sd;
            row["em_mean"] = r.em_mean;
            row["em_sd"] = r.em_sd;
            row["runs"] = r.runs;
            row["failed"] = r.failed;
            rows.push_back(row);
        }
        j["rows"] = rows;
        j["inducer_ge_prefix"] = table.inducer_ge_prefix ? ordered_json(*table.inducer_ge_prefix) : ordered_json();
        std::cout << j.dump() << "\n";
    } else {
        std::cout << table.to_tsv();
        std::printf("wrote %s\n", path.string().c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Inducer-tuning laboratory: train, evaluate and verify parameter-efficient tuning modes"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    std::string out_dir;
    app.add_option("--seed", seed, "Override the run seed");
    app.add_option("--out-dir", out_dir, "Override the output directory");
    app.add_flag("--json", g.json, "Print one JSON object instead of text");

    std::string config, checkpoint, split = "test", suite, task, modes, seeds = "0";
    CountArgs count;

    auto* train = app.add_subcommand("train", "Train one configuration and write metrics and a checkpoint");
    train->add_option("--config", config, "Run config file")->required();

    auto* eval = app.add_subcommand("eval", "Greedy-decode a split with a saved checkpoint");
    eval->add_option("--config", config, "Run config file (task definition)")->required();
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <out_dir>/checkpoint.bin)");
    eval->add_option("--split", split, "train, val or test");

    auto* cp = app.add_subcommand("count-params", "Report parameter budgets for a model preset and mode");
    cp->add_option("--preset", count.preset, "Model preset: gpt2-small or toy");
    cp->add_option("--mode", count.mode, "Mode kind or named preset");
    cp->add_option("--l", count.l, "Prefix length");
    cp->add_option("--r", count.r, "LoRA rank");
    cp->add_option("--rk", count.rk, "Key MLP bottleneck");
    cp->add_option("--rv", count.rv, "Value MLP bottleneck");
    cp->add_option("--ra", count.ra, "FFN adapter bottleneck");
    cp->add_flag("--published", count.published, "Use the published setting for the mode");

    auto* verify = app.add_subcommand("verify", "Run a property suite");
    verify->add_option("--suite", suite, "algebra, gradients, freezing, causal, kernel, counts or all")->required();

    auto* ablate = app.add_subcommand("ablate", "Train several modes over several seeds and tabulate");
    ablate->add_option("--config", config, "Base run config")->required();
    ablate->add_option("--task", task, "Override task kind");
    ablate->add_option("--modes", modes, "Comma-separated mode names")->required();
    ablate->add_option("--seeds", seeds, "Comma-separated seeds");

    CLI11_PARSE(app, argc, argv);
    if (app.count("--seed")) g.seed = seed;
    if (app.count("--out-dir")) g.out_dir = out_dir;

    try {
        if (*train) return cmd_train(config, g);
        if (*eval) return cmd_eval(config, checkpoint, split, g);
        if (*cp) return cmd_count(count, g);
        if (*verify) return cmd_verify(suite, g);
        if (*ablate) return cmd_ablate(config, task, modes, seeds, g);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
