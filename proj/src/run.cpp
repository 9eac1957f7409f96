#include "inducer/run.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "inducer/checkpoint.hpp"

namespace inducer {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

std::pair<double, double> mean_sd(const std::vector<double>& xs)
{
    if (xs.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string fixed(double v, int digits)
{
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(digits);
    ss << v;
    return ss.str();
}

}  // namespace

std::vector<MetricsRecord> execute_run(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                       const std::function<void(const MetricsRecord&)>& on_record)
{
    std::filesystem::create_directories(out_dir);
    RunConfig resolved = cfg;
    resolved.out_dir = out_dir.string();
    write_text(out_dir / "config.cfg", resolved.serialize());

    Model model = build_model(cfg.model, cfg.mode, cfg.seed);
    freeze_base(model);
    const Dataset data = make_task(cfg.task);

    std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics) throw ConfigError("cannot write '" + (out_dir / "metrics.jsonl").string() + "'");
    auto records = train(model, data, cfg.train, [&](const MetricsRecord& r) {
        metrics << r.to_json() << "\n";
        metrics.flush();
        if (on_record) on_record(r);
    });
    save_checkpoint(model, out_dir / "checkpoint.bin");
    return records;
}

TuningMode ablation_mode(const RunConfig& base, const std::string& name)
{
    std::map<std::string, std::size_t> overrides;
    const std::string prefix = name + ".";
    for (const auto& [key, value] : base.ablate) {
        if (key.rfind(prefix, 0) != 0) continue;
        try {
            overrides[key.substr(prefix.size())] = std::stoul(value);
        } catch (const std::exception&) {
            throw ConfigError("ablate." + key + " = '" + value + "' is not a size");
        }
    }
    TuningMode mode = resolve_mode(name, overrides);
    if (overrides.empty() && mode.kind == base.mode.kind) mode = base.mode;
    return mode;
}

AblationTable run_ablation(const RunConfig& base, const std::vector<std::string>& modes,
                           const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                           const std::function<void(const AblationRun&)>& on_run)
{
    if (modes.empty() || seeds.empty()) throw ConfigError("ablation needs at least one mode and one seed");
    std::vector<TuningMode> resolved;
    for (const auto& m : modes) resolved.push_back(ablation_mode(base, m));

    AblationTable table;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        AblationRow row;
        row.mode = modes[k];
        row.kind = resolved[k].kind;
        row.trainable_pct = count_params(parameter_layout(base.model, resolved[k]), resolved[k]).trainable_pct;
        std::vector<double> accs, ems;
        for (const auto seed : seeds) {
            RunConfig cfg = base;
            cfg.mode = resolved[k];
            cfg.set_seed(seed);
            AblationRun run{modes[k], seed, std::nullopt, {}};
            try {
                const auto records = execute_run(cfg, out_dir / (modes[k] + "-seed" + std::to_string(seed)));
                run.final = records.back();
                accs.push_back(run.final->acc);
                ems.push_back(run.final->em);
            } catch (const std::exception& e) {
                run.error = e.what();
                ++row.failed;
            }
            ++row.runs;
            if (on_run) on_run(run);
            table.runs.push_back(std::move(run));
        }
        std::tie(row.acc_mean, row.acc_sd) = mean_sd(accs);
        std::tie(row.em_mean, row.em_sd) = mean_sd(ems);
        table.rows.push_back(row);
    }

    const AblationRow* inducer = nullptr;
    const AblationRow* prefix = nullptr;
    for (const auto& row : table.rows) {
        const bool finished = row.runs > row.failed;
        if (row.kind == ModeKind::Inducer && finished && !inducer) inducer = &row;
        if (row.kind == ModeKind::Prefix && finished && !prefix) prefix = &row;
    }
    if (inducer && prefix) table.inducer_ge_prefix = inducer->acc_mean >= prefix->acc_mean;
    return table;
}

std::string AblationTable::to_tsv() const
{
    std::ostringstream o;
    o << "mode\ttrainable_pct\tacc_mean\tacc_sd\tem_mean\tem_sd\truns\tfailed\n";
    for (const auto& r : rows) {
        o << r.mode << '\t' << fixed(r.trainable_pct, 2) << '\t';
        if (r.runs == r.failed) {
            o << "FAILED\tFAILED\tFAILED\tFAILED";
        } else {
            o << fixed(r.acc_mean, 4) << '\t' << fixed(r.acc_sd, 4) << '\t' << fixed(r.em_mean, 4) << '\t'
              << fixed(r.em_sd, 4);
        }
        o << '\t' << r.runs << '\t' << r.failed << '\n';
    }
    o << "flag\tinducer>=prefix\t";
    if (!inducer_ge_prefix) {
        o << "n/a";
    } else {
        o << (*inducer_ge_prefix ? "true" : "false");
    }
    o << '\n';
    for (const auto& run : runs) {
        if (!run.final) o << "failed\t" << run.mode << '\t' << run.seed << '\t' << run.error << '\n';
    }
    return o.str();
}

}  // namespace inducer
