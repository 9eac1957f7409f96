#include "inducer/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "inducer/grad_check.hpp"
#include "inducer/peft.hpp"
#include "inducer/tape.hpp"
#include "inducer/task.hpp"
#include "inducer/train.hpp"

namespace inducer {

namespace {

// Plain nested-vector linear algebra for the brute-force oracles below. None of
// it touches the tape or the library kernels.
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t)
{
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

std::vector<double> to_vec(const Tensor& t)
{
    return {t.data().begin(), t.data().end()};
}

Mat mm(const Mat& a, const Mat& b)
{
    Mat c(a.size(), std::vector<double>(b.front().size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[k].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Mat affine(const Mat& x, const Mat& w, const std::vector<double>& b)
{
    Mat y = mm(x, w);
    for (auto& row : y)
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    return y;
}

Mat cols(const Mat& m, std::size_t begin, std::size_t width)
{
    Mat out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i].assign(m[i].begin() + begin, m[i].begin() + begin + width);
    return out;
}

Mat rows(const Mat& m, std::size_t begin, std::size_t count)
{
    return Mat(m.begin() + begin, m.begin() + begin + count);
}

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> softmax(const std::vector<double>& z)
{
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> e(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += e[i] = std::exp(z[i] - m);
    for (auto& v : e) v /= s;
    return e;
}

// σ(x W1 + b1) W2 + b2 for one row.
std::vector<double> mlp_row(const std::vector<double>& x, const HeadMLP& mlp, const Tensor& b2)
{
    const Mat h0 = affine(Mat{x}, to_mat(mlp.w1), to_vec(mlp.b1));
    Mat h = h0;
    for (auto& v : h[0]) v = std::max(v, 0.0);
    return affine(h, to_mat(mlp.w2), to_vec(b2))[0];
}

double max_diff(const Mat& a, const Tensor& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b.at(i, j)));
    return m;
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    Tensor t(std::move(shape));
    for (auto& v : t.mutable_data()) v = u(rng);
    return t;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

AttentionWeights random_weights(std::size_t heads, std::size_t p, std::mt19937_64& rng)
{
    const std::size_t d = heads * p;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    return {random_tensor({d, d}, rng, s), random_tensor({d, d}, rng, s), random_tensor({d, d}, rng, s),
            random_tensor({d, d}, rng, s), random_tensor({d}, rng, 0.1), random_tensor({d}, rng, 0.1),
            random_tensor({d}, rng, 0.1), random_tensor({d}, rng, 0.1), heads};
}

HeadMLP random_mlp(std::size_t in, std::size_t r, std::size_t out, std::mt19937_64& rng)
{
    return {random_tensor({in, r}, rng, 0.5), random_tensor({r}, rng, 0.5), random_tensor({r, out}, rng, 0.5)};
}

InducerParams random_inducer(std::size_t heads, std::size_t p, bool key_mlp, bool extended, std::mt19937_64& rng)
{
    InducerParams ip;
    const std::size_t d = heads * p, width = extended ? d : p;
    const std::size_t rk = pick(rng, 1, 4), rv = pick(rng, 1, 4);
    for (std::size_t h = 0; h < heads; ++h) {
        if (key_mlp) ip.key_mlp.push_back(random_mlp(p, rk, p, rng));
        ip.value_mlp.push_back(random_mlp(p, rv, width, rng));
    }
    if (key_mlp) ip.key_bias = random_tensor({p}, rng, 0.5);
    ip.value_bias = random_tensor({width}, rng, 0.5);
    ip.extended = extended;
    return ip;
}

// Q, K, V for the oracles, with an optional low-rank update on W_q.
struct Projections {
    Mat q, k, v;
};

Projections project(const Tensor& x, const AttentionWeights& w, const LoRAParams* lp)
{
    const Mat xm = to_mat(x);
    Mat wq = to_mat(w.wq);
    if (lp) {
        const Mat ba = mm(to_mat(lp->b), to_mat(lp->a));
        for (std::size_t i = 0; i < wq.size(); ++i)
            for (std::size_t j = 0; j < wq[i].size(); ++j) wq[i][j] += ba[i][j];
    }
    return {affine(xm, wq, to_vec(w.bq)), affine(xm, to_mat(w.wk), to_vec(w.bk)),
            affine(xm, to_mat(w.wv), to_vec(w.bv))};
}

// Row i of softmax([extra..., q_i·K_j for allowed j]/√p) applied to [extra
// values; V rows]. `extra_keys` are always attendable.
std::vector<double> prepend_row(const std::vector<double>& qi, const Mat& extra_keys, const Mat& extra_values,
                                const Mat& k, const Mat& v, std::size_t i, bool causal)
{
    const double s = 1.0 / std::sqrt(static_cast<double>(qi.size()));
    std::vector<double> logits;
    std::vector<const std::vector<double>*> vals;
    for (std::size_t j = 0; j < extra_keys.size(); ++j) {
        logits.push_back(dot(qi, extra_keys[j]) * s);
        vals.push_back(&extra_values[j]);
    }
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (causal && j > i) continue;
        logits.push_back(dot(qi, k[j]) * s);
        vals.push_back(&v[j]);
    }
    const auto w = softmax(logits);
    std::vector<double> out(vals.front()->size(), 0.0);
    for (std::size_t j = 0; j < w.size(); ++j)
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[j] * (*vals[j])[c];
    return out;
}

PropertyResult make(std::string suite, std::string name, double observed, double bound, std::string detail = {})
{
    return {std::move(suite), std::move(name), observed <= bound, observed, bound, std::move(detail)};
}

// ---- algebra ------------------------------------------------------------

PropertyResult prefix_weighted_sum(std::mt19937_64& rng)
{
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = pick(rng, 1, 8), l = pick(rng, 0, 4), p = pick(rng, 1, 8);
        const bool causal = trial % 2 == 0;
        const Tensor q = random_tensor({n, p}, rng), k = random_tensor({n, p}, rng), v = random_tensor({n, p}, rng);
        PrefixParams pp;
        if (l > 0) pp = {random_tensor({l, p}, rng), random_tensor({l, p}, rng)};
        const Mask mask = Mask::causal(n);
        const Mask* mp = causal ? &mask : nullptr;
        const Tensor weighted = prefix_as_weighted_sum(q, k, v, pp, mp);
        const Tensor prepended = prefix_attention(q, k, v, pp, mp);
        const Mat pk = l ? to_mat(pp.keys) : Mat{}, pv = l ? to_mat(pp.values) : Mat{};
        const Mat qm = to_mat(q), km = to_mat(k), vm = to_mat(v);
        Mat oracle;
        for (std::size_t i = 0; i < n; ++i) oracle.push_back(prepend_row(qm[i], pk, pv, km, vm, i, causal));
        worst = std::max({worst, max_diff(oracle, weighted), max_diff(oracle, prepended)});
    }
    return make("algebra", "prefix prepend == weighted sum (500 instances)", worst, 1e-12);
}

PropertyResult inducer_prepend(std::mt19937_64& rng)
{
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t heads = pick(rng, 1, 3), p = pick(rng, 1, 6), n = pick(rng, 1, 8), d = heads * p;
        const bool causal = trial % 2 == 0;
        const bool with_lora = trial % 3 == 0;
        const AttentionWeights w = random_weights(heads, p, rng);
        const InducerParams ip = random_inducer(heads, p, true, true, rng);
        LoRAParams lp;
        if (with_lora) {
            const std::size_t r = pick(rng, 1, d);
            lp = {random_tensor({r, d}, rng, 0.3), random_tensor({d, r}, rng, 0.3)};
        }
        const Tensor x = random_tensor({n, d}, rng);
        const Mask mask = Mask::causal(n);
        const Tensor got = inducer_attention(x, w, ip, with_lora ? &lp : nullptr, causal ? &mask : nullptr);

        const auto pr = project(x, w, with_lora ? &lp : nullptr);
        const Mat wo = to_mat(w.wo);
        const auto bo = to_vec(w.bo);
        Mat oracle(n, bo);
        for (std::size_t h = 0; h < heads; ++h) {
            const Mat qh = cols(pr.q, h * p, p), kh = cols(pr.k, h * p, p);
            const Mat vwo = mm(cols(pr.v, h * p, p), rows(wo, h * p, p));
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> pk = mlp_row(qh[i], ip.key_mlp[h], ip.key_bias);
                for (std::size_t c = 0; c < p; ++c) pk[c] += qh[i][c];
                const auto fbar = prepend_row(qh[i], {}, {}, kh, vwo, i, causal);
                std::vector<double> pv = mlp_row(qh[i], ip.value_mlp[h], ip.value_bias);
                for (std::size_t c = 0; c < d; ++c) pv[c] += fbar[c];
                const auto row = prepend_row(qh[i], Mat{pk}, Mat{pv}, kh, vwo, i, causal);
                for (std::size_t c = 0; c < d; ++c) oracle[i][c] += row[c];
            }
        }
        worst = std::max(worst, max_diff(oracle, got));
    }
    return make("algebra", "inducer prepend == residual form (500 instances)", worst, 1e-10);
}

PropertyResult adaptive_prepend(std::mt19937_64& rng)
{
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t heads = pick(rng, 1, 3), p = pick(rng, 1, 6), n = pick(rng, 1, 8), d = heads * p;
        const bool causal = trial % 2 == 0;
        const AttentionWeights w = random_weights(heads, p, rng);
        const InducerParams ip = random_inducer(heads, p, false, false, rng);
        const Tensor x = random_tensor({n, d}, rng);
        const Mask mask = Mask::causal(n);
        const Tensor got = variant_attention(ModeKind::VariantAdaptive, x, w, ip, causal ? &mask : nullptr);

        const auto pr = project(x, w, nullptr);
        Mat concat(n, std::vector<double>(d, 0.0));
        for (std::size_t h = 0; h < heads; ++h) {
            const Mat qh = cols(pr.q, h * p, p), kh = cols(pr.k, h * p, p), vh = cols(pr.v, h * p, p);
            for (std::size_t i = 0; i < n; ++i) {
                const auto f = prepend_row(qh[i], {}, {}, kh, vh, i, causal);
                std::vector<double> pv = mlp_row(qh[i], ip.value_mlp[h], ip.value_bias);
                for (std::size_t c = 0; c < p; ++c) pv[c] += f[c];
                const auto row = prepend_row(qh[i], Mat{qh[i]}, Mat{pv}, kh, vh, i, causal);
                for (std::size_t c = 0; c < p; ++c) concat[i][h * p + c] = row[c];
            }
        }
        worst = std::max(worst, max_diff(affine(concat, to_mat(w.wo), to_vec(w.bo)), got));
    }
    return make("algebra", "adaptive variant == per-row prepend (200 instances)", worst, 1e-10);
}

PropertyResult head_decomposition(std::mt19937_64& rng)
{
    double worst = 0.0;
    const std::size_t head_counts[] = {1, 2, 4};
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t heads = head_counts[trial % 3], p = pick(rng, 1, 6), n = pick(rng, 1, 8);
        const AttentionWeights w = random_weights(heads, p, rng);
        const Tensor x = random_tensor({n, heads * p}, rng);
        const Mask mask = Mask::causal(n);
        const Mask* mp = trial % 2 ? &mask : nullptr;
        const Tensor whole = attention_sublayer(x, w, mp);
        const auto inter = qkv_project(x, w);
        Tensor sum;
        for (std::size_t h = 0; h < heads; ++h) {
            const Tensor part = complete_head_output(head_block(inter.q, h, p), head_block(inter.k, h, p),
                                                     head_block(inter.v, h, p), output_block(w.wo, h, p), mp);
            sum = sum.defined() ? add(sum, part) : part;
        }
        worst = std::max(worst, max_abs_diff(add_row(sum, w.bo), whole));
    }
    return make("algebra", "sum of complete head outputs == sub-layer (500 instances)", worst, 1e-12);
}

// ---- kernel -------------------------------------------------------------

std::vector<PropertyResult> kernel_suite(std::mt19937_64& rng)
{
    double value_err = 0.0, folded_err = 0.0, row_sum_err = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = pick(rng, 1, 16), p = pick(rng, 1, 8), d = p * pick(rng, 1, 3);
        const Tensor q = random_tensor({n, p}, rng), k = random_tensor({n, p}, rng), v = random_tensor({n, p}, rng);
        const Tensor wo = random_tensor({p, d}, rng);
        const KernelView kv = kernel_estimate(q, k, v);
        value_err = std::max(value_err, max_abs_diff(kv.estimate, head_attention(q, k, v)));
        folded_err = std::max(folded_err, max_abs_diff(kernel_estimate(q, k, matmul(v, wo)).estimate,
                                                       complete_head_output(q, k, v, wo)));
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += kv.weights.at(i, j);
            row_sum_err = std::max(row_sum_err, std::abs(s - 1.0));
        }
    }
    return {make("kernel", "attention == kernel estimate, C = V (1000 instances)", value_err, 1e-12),
            make("kernel", "complete head output == kernel estimate, C = V W_o block (1000 instances)", folded_err,
                 1e-12),
            make("kernel", "kernel weights sum to one", row_sum_err, 1e-12)};
}

// ---- models -------------------------------------------------------------

ModelConfig toy_config()
{
    ModelConfig cfg;
    cfg.preset = "toy";
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.head_dim = 8;
    cfg.vocab = 16;
    cfg.context = 32;
    return cfg;
}

std::vector<ModeKind> all_kinds()
{
    std::vector<ModeKind> out;
    for (const auto& name : mode_kind_names()) out.push_back(*parse_mode_kind(name));
    return out;
}

std::vector<int> random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& rng)
{
    std::vector<int> t(n);
    for (auto& v : t) v = static_cast<int>(pick(rng, 0, vocab - 1));
    return t;
}

std::vector<PropertyResult> gradient_suite(std::uint64_t seed)
{
    std::vector<PropertyResult> out;
    TaskSpec spec;
    spec.vocab = 16;
    spec.length = 6;
    const Example ex = Dataset(spec).example(Split::Train, 0);
    for (const auto kind : all_kinds()) {
        Model model(toy_config(), toy_mode(kind), seed);
        perturb_trainable(model, seed + 1, 0.1);
        std::vector<NamedTensor> params;
        for (const auto& e : model.params().entries())
            if (!e.frozen) params.push_back({e.name, e.tensor});
        GradCheckOptions opt;
        opt.max_coords_per_tensor = 64;
        opt.seed = seed;
        const auto report = grad_check([&] { return example_loss(model, ex); }, params, opt);
        out.push_back(make("gradients", std::string(mode_kind_name(kind)) + ": " + std::to_string(params.size()) +
                                            " trainable tensors vs central differences",
                           report.max_rel_error, 1e-5));
    }
    return out;
}

std::vector<PropertyResult> freezing_suite(std::uint64_t seed)
{
    std::vector<PropertyResult> out;
    TaskSpec spec;
    spec.vocab = 16;
    spec.length = 4;
    spec.train_size = 8;
    spec.val_size = 4;
    const Dataset data(spec);
    TrainConfig tc;
    tc.steps = 20;
    tc.warmup = 2;
    tc.batch_size = 2;
    tc.eval_every = 20;
    tc.lr = 1e-2;
    tc.seed = seed;
    for (const auto kind : all_kinds()) {
        if (kind == ModeKind::FullFineTune) continue;
        Model model(toy_config(), toy_mode(kind), seed);
        std::vector<Tensor> before;
        for (const auto& e : model.params().entries()) before.push_back(e.tensor.clone());
        train(model, data, tc);
        std::size_t frozen = 0, frozen_changed = 0, moved = 0;
        const auto& entries = model.params().entries();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const bool same = bit_equal(entries[i].tensor, before[i]);
            if (entries[i].frozen) {
                ++frozen;
                frozen_changed += !same;
            } else {
                moved += !same;
            }
        }
        const bool ok = frozen_changed == 0 && moved > 0;
        PropertyResult r = make("freezing", std::string(mode_kind_name(kind)) + ": frozen tensors bit-identical after training",
                                static_cast<double>(frozen_changed), 0.0,
                                std::to_string(frozen) + " frozen, " + std::to_string(moved) + " trainable moved");
        r.passed = ok;
        out.push_back(r);
    }
    return out;
}

std::vector<PropertyResult> causal_suite(std::uint64_t seed)
{
    std::vector<PropertyResult> out;
    std::mt19937_64 rng(seed);
    const ModelConfig cfg = toy_config();
    for (const auto kind : all_kinds()) {
        Model model(cfg, toy_mode(kind), seed);
        perturb_trainable(model, seed + 7, 0.2);
        std::size_t violations = 0;
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = pick(rng, 2, 12);
            const auto tokens = random_tokens(n, cfg.vocab, rng);
            const Tensor base = model.forward(tokens);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                auto changed = tokens;
                for (std::size_t j = i + 1; j < n; ++j) changed[j] = static_cast<int>(pick(rng, 0, cfg.vocab - 1));
                const Tensor other = model.forward(changed);
                const auto a = base.data().subspan(0, (i + 1) * cfg.vocab);
                const auto b = other.data().subspan(0, (i + 1) * cfg.vocab);
                violations += !std::equal(a.begin(), a.end(), b.begin());
            }
        }
        out.push_back(make("causal", std::string(mode_kind_name(kind)) + ": earlier logits ignore later tokens (50 trials)",
                           static_cast<double>(violations), 0.0));
    }
    return out;
}

std::vector<PropertyResult> counts_suite()
{
    struct Row {
        const char* preset;
        double expected;
    };
    const Row rows[] = {{"prefix-108", 1.60}, {"lora-54", 1.61}, {"adapter-108", 1.62}, {"inducer", 1.61},
                        {"mam-inducer", 1.61}, {"full", 100.0}};
    const ModelConfig gpt2 = ModelConfig::from_preset("gpt2-small");
    std::vector<PropertyResult> out;
    for (const auto& row : rows) {
        const TuningMode mode = TuningMode::from_preset(row.preset);
        const auto report = count_params(parameter_layout(gpt2, mode), mode);
        auto r = make("counts", std::string(row.preset) + " storable % on gpt2-small",
                      std::abs(report.storable_pct - row.expected), 0.05);
        r.detail = std::to_string(report.storable) + " of " + std::to_string(report.base_total);
        out.push_back(r);
    }
    // Additivity: the report equals an independent walk over a built model.
    std::size_t worst = 0;
    for (const auto kind : all_kinds()) {
        const Model model(toy_config(), toy_mode(kind), 1);
        std::size_t base = 0, added = 0;
        for (const auto& e : model.params().entries()) (e.role == ParamRole::Base ? base : added) += e.tensor.numel();
        const auto report = count_params(model);
        const std::size_t trainable = kind == ModeKind::FullFineTune ? base : added;
        worst = std::max({worst, report.base_total > base ? report.base_total - base : base - report.base_total,
                          report.trainable > trainable ? report.trainable - trainable : trainable - report.trainable});
    }
    out.push_back(make("counts", "reports equal the sum over named tensors", static_cast<double>(worst), 0.0));
    return out;
}

}  // namespace

std::vector<std::string> verify_suite_names()
{
    return {"algebra", "gradients", "freezing", "causal", "kernel", "counts"};
}

TuningMode toy_mode(ModeKind kind)
{
    TuningMode m;
    m.kind = kind;
    switch (kind) {
    case ModeKind::FullFineTune: break;
    case ModeKind::FFNAdapter: m.adapter_bottleneck = 4; break;
    case ModeKind::Prefix: m.prefix_length = 3; break;
    case ModeKind::LoRA: m.lora_rank = 2; break;
    case ModeKind::Inducer:
    case ModeKind::VariantGating:
        m.key_bottleneck = 3;
        m.value_bottleneck = 4;
        break;
    case ModeKind::InducerPlusLoRA:
        m.key_bottleneck = 2;
        m.value_bottleneck = 3;
        m.lora_rank = 2;
        break;
    case ModeKind::MAMInducer:
        m.key_bottleneck = 2;
        m.value_bottleneck = 3;
        m.lora_rank = 2;
        m.adapter_bottleneck = 3;
        break;
    case ModeKind::MAMAdapter:
        m.adapter_bottleneck = 3;
        m.prefix_length = 2;
        break;
    case ModeKind::VariantAdaptive:
    case ModeKind::VariantExtension: m.value_bottleneck = 4; break;
    }
    m.validate();
    return m;
}

void perturb_trainable(Model& model, std::uint64_t seed, double scale)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (const auto& e : model.params().entries()) {
        if (e.frozen) continue;
        Tensor t = e.tensor;
        for (auto& v : t.mutable_data()) v += u(rng);
    }
}

std::vector<PropertyResult> run_verify_suite(std::string_view suite, std::uint64_t seed)
{
    std::vector<PropertyResult> out;
    auto append = [&](std::vector<PropertyResult> more) { out.insert(out.end(), more.begin(), more.end()); };
    const bool all = suite == "all";
    bool known = all;
    std::mt19937_64 rng(seed);
    if (all || suite == "algebra") {
        known = true;
        out.push_back(prefix_weighted_sum(rng));
        out.push_back(inducer_prepend(rng));
        out.push_back(adaptive_prepend(rng));
        out.push_back(head_decomposition(rng));
    }
    if (all || suite == "kernel") {
        known = true;
        append(kernel_suite(rng));
    }
    if (all || suite == "counts") {
        known = true;
        append(counts_suite());
    }
    if (all || suite == "causal") {
        known = true;
        append(causal_suite(seed));
    }
    if (all || suite == "gradients") {
        known = true;
        append(gradient_suite(seed));
    }
    if (all || suite == "freezing") {
        known = true;
        append(freezing_suite(seed));
    }
    if (!known) {
        std::string valid = "all";
        for (const auto& n : verify_suite_names()) valid += ", " + n;
        throw ConfigError("unknown suite '" + std::string(suite) + "'; valid suites: " + valid);
    }
    return out;
}

}  // namespace inducer
