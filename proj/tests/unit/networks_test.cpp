#include <gtest/gtest.h>

#include <fstream>

#include "pipgan/errors.hpp"
#include "pipgan/networks.hpp"
#include "support/fixtures.hpp"

using namespace pipgan;
using pipgan::test::random_images;
using pipgan::test::tiny_network;

namespace {

torch::Tensor one_hot_batch(std::vector<int64_t> labels, int k) {
    return torch::one_hot(torch::tensor(labels, torch::kLong), k).to(torch::kFloat32);
}

}  // namespace

TEST(NetworkConfig, DefaultChannelPlan) {
    NetworkConfig n;
    EXPECT_EQ(n.resolved_encoder_depth(), 6);
    std::vector<int> widths;
    for (int i = 0; i < 6; ++i) widths.push_back(n.encoder_channels(i));
    EXPECT_EQ(widths, (std::vector<int>{64, 128, 256, 512, 512, 512}));
    EXPECT_EQ(n.code_channels(), 512);
    EXPECT_EQ(n.resolved_disc_depth(), 4);
}

TEST(NetworkConfig, RejectsDepthThatMissesOneByOne) {
    NetworkConfig n;
    n.image_size = 32;
    n.encoder_depth = 4;
    EXPECT_THROW(n.validate(), InvalidArgument);
    n.encoder_depth = 5;
    EXPECT_NO_THROW(n.validate());
    n.image_size = 48;
    n.encoder_depth = 0;
    EXPECT_THROW(n.validate(), InvalidArgument);
}

TEST(Generator, SixtyFourPixelCodeIsOneByOne) {
    torch::manual_seed(0);
    NetworkConfig n;
    Generator g(n);
    g->eval();
    torch::NoGradGuard guard;
    auto enc = g->encode(random_images(1, 64, 1));
    EXPECT_EQ(enc.x_c1.sizes(), (torch::IntArrayRef{1, 512, 1, 1}));
    EXPECT_EQ(enc.skips.size(), 6u);
    auto out = g->generate(random_images(1, 64, 2), one_hot_batch({2}, 5));
    EXPECT_EQ(out.sizes(), (torch::IntArrayRef{1, 3, 64, 64}));
}

TEST(Generator, ShapePreservedForEverySize) {
    for (int size : {8, 16, 32}) {
        torch::manual_seed(1);
        Generator g(tiny_network(3, size, 4));
        auto out = g->generate(random_images(2, size, 3), one_hot_batch({0, 2}, 3));
        EXPECT_EQ(out.sizes(), (torch::IntArrayRef{2, 3, size, size}));
        EXPECT_EQ(g->encode(random_images(2, size, 3)).x_c1.size(2), 1);
    }
    auto n = tiny_network(3, 32, 4);
    EXPECT_EQ(n.resolved_encoder_depth(), 5);
}

TEST(Generator, OutputStaysInUnitRange) {
    torch::manual_seed(2);
    Generator g(tiny_network(3, 16, 4));
    auto out = g->generate(random_images(4, 16, 5) * 50.0 - 25.0, one_hot_batch({0, 1, 2, 0}, 3));
    EXPECT_GE(out.min().item<float>(), 0.0f);
    EXPECT_LE(out.max().item<float>(), 1.0f);
}

TEST(Generator, ZeroInitFinalGivesGray) {
    auto n = tiny_network(3, 16, 4);
    n.zero_init_final = true;
    torch::manual_seed(3);
    Generator g(n);
    auto out = g->generate(random_images(2, 16, 6), one_hot_batch({0, 1}, 3));
    EXPECT_TRUE(torch::allclose(out, torch::full_like(out, 0.5), 0.0, 1e-7));
}

TEST(Generator, ClassificationGradientNeverReachesConditionWeights) {
    torch::manual_seed(4);
    Generator g(tiny_network(5, 16, 4));
    auto enc = g->encode(random_images(3, 16, 7));
    auto logits = g->classify_code(enc.y_c1);
    logits.sum().backward();
    auto grad = g->cond_inject()->weight.grad();
    EXPECT_TRUE(!grad.defined() || torch::count_nonzero(grad).item<int64_t>() == 0);
    EXPECT_FALSE(g->code_bias_2().grad().defined() && torch::count_nonzero(g->code_bias_2().grad()).item<int64_t>() > 0);
    // The classification path does reach the encoder.
    EXPECT_TRUE(g->code_bias_1().grad().defined());
}

TEST(Generator, ZeroConditionWithMatchingBiasesIsBitwiseShortCircuit) {
    torch::manual_seed(5);
    Generator g(tiny_network(5, 16, 4));
    {
        torch::NoGradGuard guard;
        g->code_bias_1().normal_();
        g->code_bias_2().copy_(g->code_bias_1());
        g->cond_inject()->weight.normal_();
    }
    auto enc = g->encode(random_images(3, 16, 8));
    auto y_c2 = g->inject_condition(enc.x_c1, torch::zeros({3, 5}));
    EXPECT_TRUE(torch::equal(y_c2, enc.y_c1));
}

TEST(Generator, OneHotSelectsConditionColumn) {
    torch::manual_seed(6);
    const int k = 4;
    Generator g(tiny_network(k, 8, 2));
    torch::NoGradGuard guard;
    g->cond_inject()->weight.normal_();
    auto x_c1 = torch::zeros({k, g->config().code_channels(), 1, 1});
    auto y = g->inject_condition(x_c1, torch::eye(k));
    const auto& w = g->cond_inject()->weight;  // [code, K]
    for (int j = 0; j < k; ++j) {
        auto expected = torch::leaky_relu(w.select(1, j) + g->code_bias_2(), 0.2);
        EXPECT_TRUE(torch::equal(y[j].flatten(), expected));
    }
}

TEST(Generator, ConditionChangesOutput) {
    torch::manual_seed(7);
    Generator g(tiny_network(3, 16, 4));
    {
        torch::NoGradGuard guard;
        g->cond_inject()->weight.normal_(0.0, 1.0);
    }
    g->eval();
    auto x = random_images(1, 16, 9);
    auto a = g->generate(x, one_hot_batch({0}, 3));
    auto b = g->generate(x, one_hot_batch({2}, 3));
    EXPECT_GT((a - b).abs().max().item<float>(), 0.0f);
}

TEST(Generator, DropoutIsSeededAndOffByDefault) {
    auto n = tiny_network(3, 16, 4);
    n.noise_mode = NoiseMode::dropout;
    torch::manual_seed(8);
    Generator g(n);
    auto x = random_images(2, 16, 10);
    auto c = one_hot_batch({0, 1}, 3);
    auto a = g->generate(x, c, make_generator(42));
    auto b = g->generate(x, c, make_generator(42));
    auto d = g->generate(x, c, make_generator(43));
    EXPECT_TRUE(torch::equal(a, b));
    EXPECT_FALSE(torch::equal(a, d));

    torch::manual_seed(8);
    Generator quiet(tiny_network(3, 16, 4));
    auto q1 = quiet->generate(x, c, make_generator(1));
    auto q2 = quiet->generate(x, c, make_generator(2));
    EXPECT_TRUE(torch::equal(q1, q2));
}

TEST(Generator, SkipWiringMatchesEncoderResolution) {
    torch::manual_seed(9);
    Generator g(tiny_network(3, 16, 4));
    auto enc = g->encode(random_images(2, 16, 11));
    auto y_c2 = g->inject_condition(enc.x_c1, one_hot_batch({1, 2}, 3));
    std::vector<torch::Tensor> inputs;
    g->decode(y_c2, enc.skips, std::nullopt, &inputs);
    const int depth = g->config().resolved_encoder_depth();
    ASSERT_EQ(static_cast<int>(inputs.size()), depth);
    EXPECT_TRUE(torch::equal(inputs[0], y_c2));
    for (int j = 1; j < depth; ++j) {
        const auto& skip = enc.skips[static_cast<std::size_t>(depth - 1 - j)];
        const auto c = skip.size(1);
        auto tail = inputs[static_cast<std::size_t>(j)].narrow(1, inputs[static_cast<std::size_t>(j)].size(1) - c, c);
        EXPECT_EQ(tail.sizes(), skip.sizes());
        EXPECT_TRUE(torch::equal(tail, torch::relu(skip))) << "decoder stage " << j;
    }
}

TEST(Generator, RejectsWrongShapes) {
    Generator g(tiny_network(3, 16, 4));
    EXPECT_THROW(g->generate(random_images(1, 8, 1), one_hot_batch({0}, 3)), ShapeMismatch);
    EXPECT_THROW(g->generate(random_images(1, 16, 1), one_hot_batch({0}, 4)), ShapeMismatch);
}

TEST(Generator, ParameterGroupsPartitionTrainables) {
    Generator g(tiny_network(3, 16, 4));
    const auto total = g->parameters().size();
    const auto enc = g->encoder_parameters().size();
    const auto dec = g->decoder_parameters().size();
    // Plus b_c1, b_c2, the classification head (2) and the condition weights.
    EXPECT_EQ(enc + dec + 5, total);
}

TEST(Discriminator, LogitSizes) {
    {
        NetworkConfig n;
        Discriminator d(n);
        auto logits = d->forward(random_images(2, 64, 1), random_images(2, 64, 2));
        EXPECT_EQ(logits.sizes(), (torch::IntArrayRef{2, 1, 1, 1}));
    }
    for (int size : {16, 32, 128}) {
        auto n = tiny_network(3, size, 2);
        Discriminator d(n);
        auto logits = d->forward(random_images(1, size, 1), random_images(1, size, 2));
        const int expected = (size >> n.resolved_disc_depth()) - 3;
        EXPECT_EQ(logits.size(2), expected);
        EXPECT_EQ(d->logit_size(), expected);
    }
}

TEST(Discriminator, PerSampleScoresIgnoreBatchMates) {
    torch::manual_seed(10);
    Discriminator d(tiny_network(3, 16, 4));
    auto c = random_images(4, 16, 3);
    auto x = random_images(4, 16, 4);
    auto full = d->score(c, x);
    for (int64_t i = 0; i < 4; ++i) {
        auto single = d->score(c.narrow(0, i, 1), x.narrow(0, i, 1));
        EXPECT_NEAR(single.item<float>(), full[i].item<float>(), 1e-6);
    }
}

TEST(Cascade, FiveMapsOfStrictlyDecreasingResolution) {
    CascadeNet net(CascadeLayout::compact, 1);
    auto maps = net->forward(random_images(2, 32, 5));
    ASSERT_EQ(maps.size(), 5u);
    for (std::size_t n = 1; n < maps.size(); ++n) EXPECT_LT(maps[n].size(2), maps[n - 1].size(2));
    for (const auto& p : net->parameters()) EXPECT_FALSE(p.requires_grad());

    CascadeNet vgg(CascadeLayout::vgg19, 1);
    auto vmaps = vgg->forward(random_images(1, 32, 5));
    ASSERT_EQ(vmaps.size(), 5u);
    std::vector<int64_t> channels;
    for (std::size_t n = 0; n < vmaps.size(); ++n) {
        channels.push_back(vmaps[n].size(1));
        if (n) EXPECT_LT(vmaps[n].size(2), vmaps[n - 1].size(2));
    }
    EXPECT_EQ(channels, (std::vector<int64_t>{64, 128, 256, 512, 512}));
}

TEST(Cascade, SeededAndDigestStable) {
    CascadeNet a(CascadeLayout::compact, 77);
    CascadeNet b(CascadeLayout::compact, 77);
    CascadeNet c(CascadeLayout::compact, 78);
    EXPECT_EQ(parameter_digest(*a), parameter_digest(*b));
    EXPECT_NE(parameter_digest(*a), parameter_digest(*c));
    const auto before = parameter_digest(*a);
    auto img = random_images(1, 16, 1).requires_grad_(true);
    auto maps = a->forward(img);
    maps.back().sum().backward();
    EXPECT_TRUE(img.grad().defined());
    EXPECT_EQ(parameter_digest(*a), before);
}

TEST(Cascade, LoadWeightsFromNamedDict) {
    pipgan::test::TempDir dir;
    CascadeNet source(CascadeLayout::compact, 5);
    c10::Dict<std::string, torch::Tensor> dict;
    for (const auto& item : source->named_parameters()) dict.insert(item.key(), item.value().detach().clone());
    auto bytes = torch::pickle_save(c10::IValue(dict));
    const auto path = (dir / "w.pt").string();
    std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

    CascadeNet target(CascadeLayout::compact, 6);
    target->load_weights(path);
    EXPECT_EQ(parameter_digest(*target), parameter_digest(*source));
    EXPECT_THROW(target->load_weights((dir / "none.pt").string()), MissingFile);

    CascadeNet vgg(CascadeLayout::vgg19, 1);
    EXPECT_THROW(vgg->load_weights(path), Error);
}
