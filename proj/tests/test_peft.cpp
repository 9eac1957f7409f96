#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "inducer/model.hpp"
#include "inducer/peft.hpp"
#include "peft_oracles.hpp"

using namespace inducer;
using oracle::Mat;
using oracle::Vec;
using oracle::add_vec;
using oracle::inducer_prepend_oracle;
using oracle::mlp_row;
using oracle::project;
using oracle::random_inducer;
using oracle::random_mlp;
using oracle::random_weights;

namespace {

void zero_second_layers(InducerParams& ip)
{
    for (auto& m : ip.key_mlp) m.w2 = Tensor(m.w2.shape());
    for (auto& m : ip.value_mlp) m.w2 = Tensor(m.w2.shape());
    if (ip.key_bias.defined()) ip.key_bias = Tensor(ip.key_bias.shape());
    ip.value_bias = Tensor(ip.value_bias.shape());
}


Mat adaptive_prepend_oracle(const Tensor& x, const AttentionWeights& w, const InducerParams& ip, bool causal)
{
    const std::size_t heads = w.num_heads, p = w.head_dim(), n = x.rows();
    const auto pr = project(x, w, oracle::from(w.wq));
    Mat concat(n);
    for (std::size_t h = 0; h < heads; ++h) {
        const Mat q = oracle::block_cols(pr.q, h * p, p), k = oracle::block_cols(pr.k, h * p, p),
                  v = oracle::block_cols(pr.v, h * p, p);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec f = oracle::attend_row(q[i], {}, {}, k, v, i, causal);
            const Vec pv = add_vec(f, mlp_row(q[i], ip.value_mlp[h], ip.value_bias));
            const Vec row = oracle::attend_row(q[i], {q[i]}, {pv}, k, v, i, causal);
            concat[i].insert(concat[i].end(), row.begin(), row.end());
        }
    }
    return oracle::add_bias(oracle::matmul(concat, oracle::from(w.wo)), oracle::vec(w.bo));
}

}  // namespace

TEST(FFNAdapter, ZeroSecondLayerIsIdentity)
{
    std::mt19937_64 rng(1);
    const Tensor h = oracle::random_tensor({3, 4}, rng);
    const FFNAdapterParams ap{oracle::random_tensor({4, 2}, rng), Tensor({2, 4})};
    EXPECT_TRUE(bit_equal(ffn_adapter(h, ap), h));

    const FFNAdapterParams full{oracle::random_tensor({4, 2}, rng), oracle::random_tensor({2, 4}, rng)};
    const Tensor zero = ffn_adapter(Tensor({3, 4}), full);
    for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(FFNAdapter, MatchesDenseExpansion)
{
    std::mt19937_64 rng(2);
    const Tensor h = oracle::random_tensor({2, 4}, rng);
    const FFNAdapterParams ap{oracle::random_tensor({4, 3}, rng), oracle::random_tensor({3, 4}, rng)};
    const Mat w1 = oracle::from(ap.w1), w2 = oracle::from(ap.w2);
    Mat expect = oracle::from(h);
    for (auto& row : expect) row = add_vec(row, oracle::two_layer(row, w1, Vec(3, 0.0), w2, Vec(4, 0.0)));
    EXPECT_LE(oracle::max_diff(expect, ffn_adapter(h, ap)), 1e-14);
    EXPECT_THROW(ffn_adapter(Tensor({2, 5}), ap), ShapeError);
}

TEST(PrefixAttention, EmptyPrefixIsBaseAttention)
{
    std::mt19937_64 rng(3);
    const Tensor q = oracle::random_tensor({3, 2}, rng), k = oracle::random_tensor({3, 2}, rng),
                 v = oracle::random_tensor({3, 2}, rng);
    const Mask mask = Mask::causal(3);
    EXPECT_TRUE(bit_equal(prefix_attention(q, k, v, {}, &mask), head_attention(q, k, v, &mask)));
    const Tensor mu = prefix_mass(q, k, {}, &mask);
    for (double m : mu.data()) EXPECT_EQ(m, 0.0);
}

TEST(PrefixAttention, VanishingPrefixLogitsGiveBaseAttention)
{
    std::mt19937_64 rng(4);
    Tensor q = oracle::random_tensor({3, 2}, rng);
    for (auto& v : q.mutable_data()) v = std::abs(v) + 0.1;
    const Tensor k = oracle::random_tensor({3, 2}, rng), v = oracle::random_tensor({3, 2}, rng);
    const PrefixParams pp{Tensor({2, 2}, -1e6), oracle::random_tensor({2, 2}, rng)};
    EXPECT_LE(max_abs_diff(prefix_attention(q, k, v, pp), head_attention(q, k, v)), 1e-15);
}

TEST(PrefixAttention, WeightedSumFormOverRandomInstances)
{
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = oracle::pick(rng, 1, 8), p = oracle::pick(rng, 1, 6), l = oracle::pick(rng, 1, 4);
        const Tensor q = oracle::random_tensor({n, p}, rng, 2.0), k = oracle::random_tensor({n, p}, rng, 2.0),
                     v = oracle::random_tensor({n, p}, rng);
        const PrefixParams pp{oracle::random_tensor({l, p}, rng, 2.0), oracle::random_tensor({l, p}, rng)};
        const Mask mask = Mask::causal(n);
        const Mask* m = trial % 2 ? &mask : nullptr;
        const Tensor direct = prefix_attention(q, k, v, pp, m);
        worst = std::max(worst, max_abs_diff(direct, prefix_as_weighted_sum(q, k, v, pp, m)));
        Mat expect;
        for (std::size_t i = 0; i < n; ++i)
            expect.push_back(oracle::attend_row(oracle::from(q)[i], oracle::from(pp.keys), oracle::from(pp.values),
                                                oracle::from(k), oracle::from(v), i, m != nullptr));
        worst = std::max(worst, oracle::max_diff(expect, direct));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(PrefixAttention, SmallCaseMatchesWeightedSum)
{
    std::mt19937_64 rng(6);
    const Tensor q = oracle::random_tensor({2, 2}, rng), k = oracle::random_tensor({2, 2}, rng),
                 v = oracle::random_tensor({2, 2}, rng);
    const PrefixParams pp{oracle::random_tensor({1, 2}, rng), oracle::random_tensor({1, 2}, rng)};
    EXPECT_LE(max_abs_diff(prefix_attention(q, k, v, pp), prefix_as_weighted_sum(q, k, v, pp)), 1e-12);
}

TEST(PrefixAttention, DuplicatedKeyAsPrefix)
{
    std::mt19937_64 rng(7);
    const Tensor q = oracle::random_tensor({3, 2}, rng), k = oracle::random_tensor({3, 2}, rng),
                 v = oracle::random_tensor({3, 2}, rng);
    const PrefixParams pp{slice_rows(k, 1, 1), slice_rows(v, 1, 1)};
    const Tensor kd[] = {slice_rows(k, 1, 1), k};
    const Tensor vd[] = {slice_rows(v, 1, 1), v};
    EXPECT_LE(max_abs_diff(prefix_as_weighted_sum(q, k, v, pp), head_attention(q, concat_rows(kd), concat_rows(vd))),
              1e-15);
}

TEST(LoRA, ZeroBLeavesWeightAndNeverMutates)
{
    std::mt19937_64 rng(8);
    const Tensor w = oracle::random_tensor({4, 4}, rng);
    const Tensor before = w.clone();
    EXPECT_TRUE(bit_equal(lora_apply(w, {oracle::random_tensor({2, 4}, rng), Tensor({4, 2})}), w));
    const Tensor out = lora_apply(w, {oracle::random_tensor({2, 4}, rng), oracle::random_tensor({4, 2}, rng)});
    EXPECT_FALSE(bit_equal(out, w));
    EXPECT_TRUE(bit_equal(w, before));
}

TEST(LoRA, FullRankCancellation)
{
    std::mt19937_64 rng(9);
    const Tensor w = oracle::random_tensor({3, 3}, rng);
    const Tensor z = lora_apply(w, {scale(w, -1.0), Tensor::identity(3)});
    for (double v : z.data()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(lora_apply(w, {Tensor({2, 3}), Tensor({3, 3})}), ShapeError);
    EXPECT_THROW(lora_apply(w, {Tensor({4, 3}), Tensor({3, 4})}), ShapeError);
}

TEST(LoRA, UpdateRankIsBounded)
{
    std::mt19937_64 rng(10);
    for (std::size_t r : {1u, 2u, 5u}) {
        const Tensor w = Tensor({12, 12});
        const Tensor ba = lora_apply(w, {oracle::random_tensor({r, 12}, rng), oracle::random_tensor({12, r}, rng)});
        Eigen::MatrixXd m(12, 12);
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 12; ++j) m(i, j) = ba.at(i, j);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
        EXPECT_GT(sv(r - 1), 1e-6);
        for (int i = static_cast<int>(r); i < 12; ++i) EXPECT_LT(sv(i), 1e-10) << "rank " << r << " index " << i;
    }
}

TEST(InducerKeys, ZeroMlpGivesQueryAndRowsAreIndependent)
{
    std::mt19937_64 rng(11);
    InducerParams ip = random_inducer(2, 3, 4, 5, true, rng);
    const Tensor q = oracle::random_tensor({4, 3}, rng);
    InducerParams zero = ip;
    zero_second_layers(zero);
    EXPECT_TRUE(bit_equal(inducer_keys(q, zero, 1), q));

    const Tensor pk = inducer_keys(q, ip, 1);
    Tensor q2 = q.clone();
    q2.mutable_data()[2 * 3 + 1] += 0.7;
    const Tensor pk2 = inducer_keys(q2, ip, 1);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            if (i == 2) continue;
            EXPECT_EQ(pk.at(i, c), pk2.at(i, c));
        }
    EXPECT_GT(std::abs(pk.at(2, 1) - pk2.at(2, 1)), 0.0);
}

TEST(InducerKeys, MatchesDenseExpansion)
{
    std::mt19937_64 rng(12);
    const InducerParams ip = random_inducer(2, 3, 4, 5, true, rng);
    const Tensor q = oracle::random_tensor({4, 3}, rng);
    Mat expect;
    for (const auto& row : oracle::from(q)) expect.push_back(add_vec(row, mlp_row(row, ip.key_mlp[0], ip.key_bias)));
    EXPECT_LE(oracle::max_diff(expect, inducer_keys(q, ip, 0)), 1e-14);
    EXPECT_THROW(inducer_keys(Tensor({2, 4}), ip, 0), ShapeError);
}

TEST(InducerGate, SymmetryLimitAndSoftmaxOracle)
{
    std::mt19937_64 rng(13);
    const Tensor q = oracle::random_tensor({1, 3}, rng), k = oracle::random_tensor({1, 3}, rng);
    EXPECT_NEAR(inducer_gate(q, k, k)[0], 0.5, 1e-15);

    const Tensor pos = Tensor::matrix({{1, 2, 0.5}});
    EXPECT_LT(inducer_gate(pos, scale(pos, -1e6), pos)[0], 1e-300);

    const Tensor q3 = oracle::random_tensor({3, 4}, rng), k3 = oracle::random_tensor({3, 4}, rng),
                 pk = oracle::random_tensor({3, 4}, rng);
    const Mask mask = Mask::causal(3);
    const Tensor gate = inducer_gate(q3, pk, k3, &mask);
    const Mat qm = oracle::from(q3), km = oracle::from(k3), pm = oracle::from(pk);
    for (std::size_t i = 0; i < 3; ++i) {
        long double a = std::exp(static_cast<long double>(oracle::dot(qm[i], pm[i])) / 2.0L), total = a;
        for (std::size_t j = 0; j <= i; ++j) total += std::exp(static_cast<long double>(oracle::dot(qm[i], km[j])) / 2.0L);
        EXPECT_NEAR(gate[i], static_cast<double>(a / total), 1e-14);
        EXPECT_GT(gate[i], 0.0);
        EXPECT_LT(gate[i], 1.0);
    }
}

TEST(InducerGate, LargeLogitsStayFinite)
{
    const Tensor q = Tensor::matrix({{300, 0}, {0, 300}});
    const Tensor g = inducer_gate(q, q, scale(q, 0.5));
    EXPECT_TRUE(all_finite(g));
    EXPECT_NEAR(g[0], 1.0, 1e-12);
}

TEST(MlpVBar, ZeroAndDenseExpansion)
{
    std::mt19937_64 rng(14);
    InducerParams ip = random_inducer(2, 3, 4, 5, true, rng);
    const Tensor q = oracle::random_tensor({4, 3}, rng);
    Mat expect;
    for (const auto& row : oracle::from(q)) expect.push_back(mlp_row(row, ip.value_mlp[1], ip.value_bias));
    const Tensor out = mlp_v_bar(q, ip, 1);
    EXPECT_EQ(out.shape(), (Shape{4, 6}));
    EXPECT_LE(oracle::max_diff(expect, out), 1e-14);
    zero_second_layers(ip);
    const Tensor zero = mlp_v_bar(q, ip, 0);
    for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(MlpVBar, ParameterCountPerHead)
{
    const ModelConfig cfg{"custom", 1, 2, 3, 0, 16, 8};
    TuningMode mode;
    mode.kind = ModeKind::VariantExtension;
    mode.value_bottleneck = 5;
    std::size_t added = 0;
    for (const auto& spec : parameter_layout(cfg, mode))
        if (spec.role == ParamRole::Added) added += shape_numel(spec.shape);
    const std::size_t p = 3, r = 5, d = 6;
    EXPECT_EQ(added, 2 * (p * r + r + r * d) + d);
    EXPECT_EQ(added, oracle::value_mlp_added(2, p, r, d));
    EXPECT_EQ(count_params(parameter_layout(cfg, mode), mode).trainable, added);
}

TEST(InducerAttention, ZeroSecondLayersReproduceSublayer)
{
    std::mt19937_64 rng(15);
    const AttentionWeights w = random_weights(2, 3, rng);
    InducerParams ip = random_inducer(2, 3, 4, 5, true, rng);
    zero_second_layers(ip);
    const Tensor x = oracle::random_tensor({5, 6}, rng);
    const Mask mask = Mask::causal(5);
    EXPECT_LE(max_abs_diff(inducer_attention(x, w, ip, nullptr, &mask), attention_sublayer(x, w, &mask)), 1e-15);
}

TEST(InducerAttention, MatchesPerRowPrependConstruction)
{
    std::mt19937_64 rng(16);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t heads = oracle::pick(rng, 1, 3), p = oracle::pick(rng, 1, 4), n = oracle::pick(rng, 1, 6);
        const AttentionWeights w = random_weights(heads, p, rng);
        const InducerParams ip = random_inducer(heads, p, oracle::pick(rng, 1, 4), oracle::pick(rng, 1, 4), true, rng);
        const Tensor x = oracle::random_tensor({n, heads * p}, rng);
        const Mask mask = Mask::causal(n);
        const bool causal = trial % 2;
        const Mask* m = causal ? &mask : nullptr;
        worst = std::max(worst, oracle::max_diff(inducer_prepend_oracle(x, w, ip, oracle::from(w.wq), causal),
                                                 inducer_attention(x, w, ip, nullptr, m)));

        const LoRAParams lp{oracle::random_tensor({1, heads * p}, rng), oracle::random_tensor({heads * p, 1}, rng)};
        const Mat wq = oracle::from(add(w.wq, matmul(lp.b, lp.a)));
        worst = std::max(worst, oracle::max_diff(inducer_prepend_oracle(x, w, ip, wq, causal),
                                                 inducer_attention(x, w, ip, &lp, m)));
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(InducerAttention, TraceRecordsGateAndLogits)
{
    std::mt19937_64 rng(17);
    const AttentionWeights w = random_weights(2, 2, rng);
    const InducerParams ip = random_inducer(2, 2, 3, 3, true, rng);
    const Tensor x = oracle::random_tensor({4, 4}, rng);
    const Mask mask = Mask::causal(4);
    InducerForwardTrace trace;
    inducer_attention(x, w, ip, nullptr, &mask, &trace);
    ASSERT_EQ(trace.heads.size(), 2u);
    for (const auto& h : trace.heads) {
        EXPECT_EQ(h.value_residual.shape(), (Shape{4, 4}));
        EXPECT_EQ(h.gate_logits.numel(), 4u);
        for (double g : h.gate.data()) {
            EXPECT_GT(g, 0.0);
            EXPECT_LT(g, 1.0);
        }
    }
    EXPECT_LE(max_abs_diff(trace.heads[1].gate,
                           inducer_gate(head_block(trace.q, 1, 2), trace.heads[1].inducer_keys,
                                        head_block(trace.k, 1, 2), &mask)),
              0.0);
}

TEST(InducerAttention, CausalUnderFuturePerturbation)
{
    std::mt19937_64 rng(18);
    const AttentionWeights w = random_weights(2, 2, rng);
    const InducerParams ip = random_inducer(2, 2, 3, 3, true, rng);
    const Mask mask = Mask::causal(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = oracle::random_tensor({6, 4}, rng);
        const std::size_t cut = oracle::pick(rng, 0, 4);
        Tensor y = x.clone();
        for (std::size_t i = (cut + 1) * 4; i < y.numel(); ++i) y.mutable_data()[i] = oracle::random_tensor({1}, rng)[0];
        const Tensor a = inducer_attention(x, w, ip, nullptr, &mask), b = inducer_attention(y, w, ip, nullptr, &mask);
        for (std::size_t i = 0; i < (cut + 1) * 4; ++i) EXPECT_EQ(a[i], b[i]);
    }
}

TEST(InducerAttention, MissingKeyMlpIsConfigError)
{
    std::mt19937_64 rng(19);
    const AttentionWeights w = random_weights(2, 2, rng);
    EXPECT_THROW(inducer_attention(Tensor({2, 4}), w, random_inducer(2, 2, 0, 3, true, rng), nullptr), ConfigError);
    EXPECT_THROW(inducer_attention(Tensor({2, 4}), w, random_inducer(1, 2, 2, 3, true, rng), nullptr), ConfigError);
}

TEST(Variants, ExtensionEqualsInducerWithZeroKeyMlp)
{
    std::mt19937_64 rng(20);
    const AttentionWeights w = random_weights(2, 3, rng);
    const InducerParams ext = random_inducer(2, 3, 0, 4, true, rng);
    InducerParams with_key = ext;
    for (std::size_t h = 0; h < 2; ++h) with_key.key_mlp.push_back({oracle::random_tensor({3, 2}, rng), Tensor({2}),
                                                                     Tensor({2, 3})});
    with_key.key_bias = Tensor({3});
    const Tensor x = oracle::random_tensor({4, 6}, rng);
    const Mask mask = Mask::causal(4);
    EXPECT_LE(max_abs_diff(variant_attention(ModeKind::VariantExtension, x, w, ext, &mask),
                           inducer_attention(x, w, with_key, nullptr, &mask)),
              1e-12);
}

TEST(Variants, GatingWithVanishingGateIsBaseSublayer)
{
    std::mt19937_64 rng(21);
    const std::size_t p = 3;
    const AttentionWeights w = random_weights(2, p, rng);
    InducerParams ip = random_inducer(2, p, 2 * p, 4, true, rng);
    // relu(Q) and relu(-Q) through W1 = [I, -I], then W2 = c·[-I; I]: P_k = Q - c·Q.
    const double c = 1e9;
    for (auto& m : ip.key_mlp) {
        m.w1 = Tensor({p, 2 * p});
        m.w2 = Tensor({2 * p, p});
        m.b1 = Tensor({2 * p});
        for (std::size_t i = 0; i < p; ++i) {
            m.w1.mutable_data()[i * 2 * p + i] = 1.0;
            m.w1.mutable_data()[i * 2 * p + p + i] = -1.0;
            m.w2.mutable_data()[i * p + i] = -c;
            m.w2.mutable_data()[(p + i) * p + i] = c;
        }
    }
    ip.key_bias = Tensor({p});
    const Tensor x = oracle::random_tensor({4, 6}, rng);
    const Mask mask = Mask::causal(4);
    InducerForwardTrace trace;
    const Tensor out = variant_attention(ModeKind::VariantGating, x, w, ip, &mask, &trace);
    for (const auto& h : trace.heads)
        for (double g : h.gate.data()) EXPECT_EQ(g, 0.0);
    EXPECT_LE(max_abs_diff(out, attention_sublayer(x, w, &mask)), 1e-12);
}

TEST(Variants, GatingConvexCombination)
{
    std::mt19937_64 rng(22);
    const std::size_t p = 2;
    const AttentionWeights w = random_weights(2, p, rng);
    const InducerParams ip = random_inducer(2, p, 3, 3, true, rng);
    const Tensor x = oracle::random_tensor({3, 4}, rng);
    InducerForwardTrace trace;
    const Tensor out = variant_attention(ModeKind::VariantGating, x, w, ip, nullptr, &trace);
    Mat expect(3, oracle::vec(w.bo));
    for (std::size_t h = 0; h < 2; ++h) {
        const Tensor fbar = complete_head_output(head_block(trace.q, h, p), head_block(trace.k, h, p),
                                                 head_block(trace.v, h, p), output_block(w.wo, h, p));
        for (std::size_t i = 0; i < 3; ++i) {
            const double lam = trace.heads[h].gate[i];
            for (std::size_t col = 0; col < 4; ++col)
                expect[i][col] += (1 - lam) * fbar.at(i, col) + lam * trace.heads[h].value_residual.at(i, col);
        }
    }
    EXPECT_LE(oracle::max_diff(expect, out), 1e-12);
}

TEST(Variants, AdaptiveMatchesPrependConstruction)
{
    std::mt19937_64 rng(23);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t heads = oracle::pick(rng, 1, 3), p = oracle::pick(rng, 1, 4);
        const AttentionWeights w = random_weights(heads, p, rng);
        const InducerParams ip = random_inducer(heads, p, 0, oracle::pick(rng, 1, 4), false, rng);
        const Tensor x = oracle::random_tensor({3, heads * p}, rng);
        const Mask mask = Mask::causal(3);
        worst = std::max(worst, oracle::max_diff(adaptive_prepend_oracle(x, w, ip, true),
                                                 variant_attention(ModeKind::VariantAdaptive, x, w, ip, &mask)));
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(Variants, WrongParameterBundleIsConfigError)
{
    std::mt19937_64 rng(24);
    const AttentionWeights w = random_weights(2, 2, rng);
    const Tensor x({2, 4});
    const InducerParams keyed = random_inducer(2, 2, 2, 2, true, rng);
    const InducerParams narrow = random_inducer(2, 2, 0, 2, false, rng);
    const InducerParams wide = random_inducer(2, 2, 0, 2, true, rng);
    EXPECT_THROW(variant_attention(ModeKind::VariantAdaptive, x, w, keyed), ConfigError);
    EXPECT_THROW(variant_attention(ModeKind::VariantAdaptive, x, w, wide), ConfigError);
    EXPECT_THROW(variant_attention(ModeKind::VariantExtension, x, w, narrow), ConfigError);
    EXPECT_THROW(variant_attention(ModeKind::VariantGating, x, w, wide), ConfigError);
    EXPECT_THROW(variant_attention(ModeKind::Inducer, x, w, keyed), ConfigError);
}

TEST(MamCompose, ZeroInitLayerEqualsBaseLayer)
{
    const ModelConfig cfg = ModelConfig::from_preset("toy");
    std::mt19937_64 rng(25);
    const Tensor x = oracle::random_tensor({6, cfg.model_dim()}, rng);
    const Mask mask = Mask::causal(6);
    const Model base(cfg, TuningMode::full(), 3);
    const Tensor expect = transformer_layer(x, base.layers()[0], base.mode(), &mask);
    TuningMode mam;
    mam.kind = ModeKind::MAMInducer;
    mam.key_bottleneck = 2;
    mam.value_bottleneck = 3;
    mam.lora_rank = 2;
    mam.adapter_bottleneck = 4;
    const Model tuned(cfg, mam, 3);
    EXPECT_LE(max_abs_diff(mam_compose(x, tuned.layers()[0], mam, &mask), expect), 1e-15);
    EXPECT_THROW(mam_compose(x, tuned.layers()[0], TuningMode::full(), &mask), ConfigError);
}

TEST(MamCompose, WithoutAdapterIsInducerPlusLoRA)
{
    const ModelConfig cfg = ModelConfig::from_preset("toy");
    std::mt19937_64 rng(26);
    TuningMode mam;
    mam.kind = ModeKind::MAMInducer;
    mam.key_bottleneck = 2;
    mam.value_bottleneck = 3;
    mam.lora_rank = 2;
    mam.adapter_bottleneck = 4;
    const Model model(cfg, mam, 5);
    LayerParams layer = model.layers()[1];
    // Give every added tensor nonzero values so the comparison is not trivial.
    for (auto& m : layer.inducer->key_mlp) m.w2 = oracle::random_tensor(m.w2.shape(), rng, 0.3);
    for (auto& m : layer.inducer->value_mlp) m.w2 = oracle::random_tensor(m.w2.shape(), rng, 0.3);
    layer.lora_q->b = oracle::random_tensor(layer.lora_q->b.shape(), rng, 0.3);
    layer.adapter->w2 = Tensor(layer.adapter->w2.shape());

    TuningMode ipl = mam;
    ipl.kind = ModeKind::InducerPlusLoRA;
    ipl.adapter_bottleneck.reset();
    LayerParams plain = layer;
    plain.adapter.reset();
    const Tensor x = oracle::random_tensor({5, cfg.model_dim()}, rng);
    const Mask mask = Mask::causal(5);
    EXPECT_LE(max_abs_diff(mam_compose(x, layer, mam, &mask), transformer_layer(x, plain, ipl, &mask)), 1e-15);
}

TEST(MamCompose, TablePresetBudget)
{
    const ModelConfig cfg = ModelConfig::from_preset("gpt2-small");
    const TuningMode mode = TuningMode::from_preset("mam-inducer");
    EXPECT_EQ(*mode.key_bottleneck, 3u);
    EXPECT_EQ(*mode.value_bottleneck, 7u);
    EXPECT_EQ(*mode.lora_rank, 16u);
    EXPECT_EQ(*mode.adapter_bottleneck, 42u);
    const auto report = count_params(parameter_layout(cfg, mode), mode);
    EXPECT_NEAR(report.storable_pct, 1.61, 0.05);
}
