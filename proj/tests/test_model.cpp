#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "inducer/model.hpp"
#include "oracles.hpp"

using namespace inducer;

namespace {

ModelConfig toy()
{
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.vocab = 32;
    cfg.context = 16;
    return cfg;
}

TuningMode small(ModeKind kind)
{
    TuningMode m;
    m.kind = kind;
    switch (kind) {
    case ModeKind::FullFineTune: break;
    case ModeKind::FFNAdapter: m.adapter_bottleneck = 3; break;
    case ModeKind::Prefix: m.prefix_length = 2; break;
    case ModeKind::LoRA: m.lora_rank = 2; break;
    case ModeKind::Inducer:
    case ModeKind::VariantGating:
        m.key_bottleneck = 2;
        m.value_bottleneck = 3;
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
    case ModeKind::VariantExtension: m.value_bottleneck = 3; break;
    }
    return m;
}

const ModeKind kAllKinds[] = {ModeKind::FullFineTune,   ModeKind::FFNAdapter,       ModeKind::Prefix,
                              ModeKind::LoRA,           ModeKind::Inducer,          ModeKind::InducerPlusLoRA,
                              ModeKind::MAMInducer,     ModeKind::MAMAdapter,       ModeKind::VariantAdaptive,
                              ModeKind::VariantExtension, ModeKind::VariantGating};

std::vector<int> random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> dist(0, static_cast<int>(vocab) - 1);
    std::vector<int> t(n);
    for (auto& v : t) v = dist(rng);
    return t;
}

}  // namespace

TEST(ModelConfig, PresetsAndValidation)
{
    const auto g = ModelConfig::from_preset("gpt2-small");
    EXPECT_EQ(g.layers, 12u);
    EXPECT_EQ(g.model_dim(), 768u);
    EXPECT_EQ(g.ffn(), 3072u);
    EXPECT_EQ(g.vocab, 50257u);
    EXPECT_EQ(g.context, 1024u);
    EXPECT_THROW(ModelConfig::from_preset("gpt3"), ConfigError);
    ModelConfig bad = toy();
    bad.heads = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(CountParams, ToyHandEnumeration)
{
    // d = 8, d_ff = 32, V = 32, context 16.
    // embeddings: 32·8 + 16·8 = 384
    // per layer: attention 4·64 + 4·8 = 288, FFN 8·32 + 32 + 32·8 + 8 = 552, norms 4·8 = 32
    const std::size_t base = 384 + 2 * (288 + 552 + 32);
    EXPECT_EQ(base, 2128u);
    EXPECT_EQ(oracle::base_counts(2, 8, 32, 32, 16).total, base);

    const auto full = count_params(parameter_layout(toy(), TuningMode::full()), TuningMode::full());
    EXPECT_EQ(full.base_total, base);
    EXPECT_EQ(full.trainable, base);
    EXPECT_DOUBLE_EQ(full.trainable_pct, 100.0);

    // Inducer r_k = 2, r_v = 3, p = 4, two heads, d = 8:
    // key: 2·(4·2 + 2 + 2·4) + 4 = 40; value: 2·(4·3 + 3 + 3·8) + 8 = 86
    const TuningMode ind = small(ModeKind::Inducer);
    const auto r = count_params(parameter_layout(toy(), ind), ind);
    EXPECT_EQ(r.trainable, 2u * (40 + 86));
    EXPECT_EQ(r.storable, r.trainable);
    EXPECT_EQ(r.total, base + r.trainable);
    EXPECT_DOUBLE_EQ(r.trainable_pct, 100.0 * r.trainable / base);

    const struct {
        ModeKind kind;
        std::size_t per_layer;
    } expected[] = {
        {ModeKind::FFNAdapter, 2 * 3 * 8},          {ModeKind::Prefix, 2 * 2 * 8},
        {ModeKind::LoRA, 2 * 2 * 2 * 8},            {ModeKind::InducerPlusLoRA, 40 + 86 + 2 * 2 * 8},
        {ModeKind::MAMInducer, 40 + 86 + 32 + 48},  {ModeKind::MAMAdapter, 48 + 32},
        {ModeKind::VariantAdaptive, 2 * (12 + 3 + 12) + 4}, {ModeKind::VariantExtension, 86},
        {ModeKind::VariantGating, 40 + 86},
    };
    for (const auto& e : expected) {
        const TuningMode m = small(e.kind);
        EXPECT_EQ(count_params(parameter_layout(toy(), m), m).trainable, 2 * e.per_layer) << m.name();
    }
}

TEST(CountParams, AdditivityOverNamedTensors)
{
    for (ModeKind kind : kAllKinds) {
        const Model model(toy(), small(kind), 1);
        std::size_t total = 0, trainable = 0;
        for (const auto& e : model.params().entries()) {
            total += e.tensor.numel();
            if (!e.frozen) trainable += e.tensor.numel();
        }
        const auto r = count_params(model);
        EXPECT_EQ(r.total, total) << model.mode().name();
        EXPECT_EQ(r.trainable, trainable) << model.mode().name();
    }
}

TEST(CountParams, Gpt2SmallBudgets)
{
    const auto cfg = ModelConfig::from_preset("gpt2-small");
    const auto pct = [&](const char* name) {
        const auto mode = TuningMode::from_preset(name);
        return count_params(parameter_layout(cfg, mode), mode);
    };
    const auto prefix = pct("prefix-108");
    EXPECT_EQ(prefix.storable, 2u * 108 * 768 * 12);
    EXPECT_NEAR(prefix.storable_pct, 1.60, 0.05);
    const auto lora = pct("lora-54");
    EXPECT_EQ(lora.storable, 2u * 2 * 54 * 768 * 12);
    EXPECT_NEAR(lora.storable_pct, 1.61, 0.05);
    EXPECT_NEAR(pct("adapter-108").storable_pct, 1.62, 0.05);
    EXPECT_NEAR(pct("inducer").storable_pct, 1.61, 0.05);
    EXPECT_NEAR(pct("mam-inducer").storable_pct, 1.61, 0.05);
    EXPECT_DOUBLE_EQ(pct("full").trainable_pct, 100.0);
}

TEST(BuildModel, SameSeedIsBitIdenticalAndBaseSharedAcrossModes)
{
    const Model a(toy(), small(ModeKind::Inducer), 7), b(toy(), small(ModeKind::Inducer), 7);
    ASSERT_EQ(a.params().names(), b.params().names());
    for (const auto& name : a.params().names())
        EXPECT_TRUE(bit_equal(a.params().get(name), b.params().get(name))) << name;

    const Model c(toy(), small(ModeKind::Inducer), 8);
    EXPECT_FALSE(bit_equal(a.params().get("embed.token"), c.params().get("embed.token")));

    const Model lora(toy(), small(ModeKind::LoRA), 7);
    for (const auto& e : lora.params().entries())
        if (e.role == ParamRole::Base) EXPECT_TRUE(bit_equal(e.tensor, a.params().get(e.name))) << e.name;
}

TEST(BuildModel, InitialisationRules)
{
    const Model m(toy(), small(ModeKind::MAMInducer), 3);
    const auto& ps = m.params();
    for (double v : ps.get("layer0.ln1.gain").data()) EXPECT_EQ(v, 1.0);
    for (double v : ps.get("layer0.attn.bq").data()) EXPECT_EQ(v, 0.0);
    for (double v : ps.get("layer1.lora_q.b").data()) EXPECT_EQ(v, 0.0);
    for (double v : ps.get("layer1.adapter.w2").data()) EXPECT_EQ(v, 0.0);
    for (double v : ps.get("layer1.inducer.value.b2").data()) EXPECT_EQ(v, 0.0);
    for (double v : ps.get("layer0.inducer.key.head1.w1").data()) EXPECT_LE(std::abs(v), 0.02);
    EXPECT_THROW(Model(toy(), [] {
        TuningMode t;
        t.kind = ModeKind::Inducer;
        t.key_bottleneck = 2;
        return t;
    }(), 1), ConfigError);
}

TEST(Forward, IdentityAtInitForZeroInitModes)
{
    std::mt19937_64 rng(4);
    const Model base(toy(), TuningMode::full(), 11);
    for (ModeKind kind : {ModeKind::FFNAdapter, ModeKind::LoRA, ModeKind::Inducer, ModeKind::InducerPlusLoRA,
                          ModeKind::MAMInducer, ModeKind::VariantExtension}) {
        const Model tuned(toy(), small(kind), 11);
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const auto tokens = random_tokens(oracle::pick(rng, 1, 16), 32, rng);
            worst = std::max(worst, max_abs_diff(tuned.forward(tokens), base.forward(tokens)));
        }
        EXPECT_LE(worst, 1e-15) << tuned.mode().name();
    }
}

TEST(Forward, EmptyPrefixLayerEqualsBase)
{
    std::mt19937_64 rng(5);
    const Model base(toy(), TuningMode::full(), 2);
    LayerParams layer = base.layers()[0];
    layer.prefix = PrefixParams{};
    const Tensor x = oracle::random_tensor({5, 8}, rng);
    const Mask mask = Mask::causal(5);
    EXPECT_TRUE(bit_equal(transformer_layer(x, layer, small(ModeKind::Prefix), &mask),
                          transformer_layer(x, base.layers()[0], base.mode(), &mask)));
}

TEST(Forward, TruncationLeavesLeadingLogitsUnchanged)
{
    std::mt19937_64 rng(6);
    for (ModeKind kind : kAllKinds) {
        Model model(toy(), small(kind), 3);
        // Move every added tensor off its initial value so each mechanism is live.
        for (const auto& e : model.params().entries()) {
            if (e.role != ParamRole::Added) continue;
            Tensor t = e.tensor;
            for (auto& v : t.mutable_data()) v += oracle::random_tensor({1}, rng, 0.3)[0];
        }
        const auto tokens = random_tokens(12, 32, rng);
        const Tensor full = model.forward(tokens);
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const Tensor part = model.forward(std::span<const int>(tokens).first(i));
            EXPECT_TRUE(bit_equal(part, slice_rows(full, 0, i))) << model.mode().name() << " i=" << i;
        }
    }
}

TEST(Forward, RejectsBadInput)
{
    const Model m(toy(), TuningMode::full(), 1);
    EXPECT_THROW(m.forward(std::vector<int>{}), ShapeError);
    EXPECT_THROW(m.forward(std::vector<int>(17, 1)), ShapeError);
    EXPECT_THROW(m.forward(std::vector<int>{1, 32}), IndexError);
    EXPECT_EQ(m.forward(std::vector<int>{1, 2, 3}).shape(), (Shape{3, 32}));
}

TEST(FreezeBase, FrozenFlagsByMode)
{
    const Model full(toy(), TuningMode::full(), 1);
    for (const auto& e : full.params().entries()) EXPECT_FALSE(e.frozen) << e.name;

    const Model ipl(toy(), small(ModeKind::InducerPlusLoRA), 1);
    std::set<std::string> expect;
    for (int l = 0; l < 2; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        for (const char* part : {"key", "value"}) {
            for (int h = 0; h < 2; ++h)
                for (const char* t : {"w1", "b1", "w2"})
                    expect.insert(p + "inducer." + part + ".head" + std::to_string(h) + "." + t);
            expect.insert(p + "inducer." + part + ".b2");
        }
        expect.insert(p + "lora_q.a");
        expect.insert(p + "lora_q.b");
    }
    const auto names = ipl.params().trainable_names();
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()), expect);
    for (const auto& e : ipl.params().entries()) {
        EXPECT_EQ(e.frozen, e.role == ParamRole::Base) << e.name;
        EXPECT_EQ(e.tensor.requires_grad(), !e.frozen) << e.name;
    }
}

TEST(ParameterStore, UniqueNamesAndLookupErrors)
{
    ParameterStore store;
    store.add("a", Tensor({2}), ParamRole::Base, true);
    EXPECT_THROW(store.add("a", Tensor({2}), ParamRole::Base, true), ConfigError);
    EXPECT_THROW(store.get("missing"), ConfigError);
    store.set_frozen("a", false);
    EXPECT_EQ(store.trainable().size(), 1u);
}
