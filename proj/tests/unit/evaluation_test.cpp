#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "pipgan/errors.hpp"
#include "pipgan/evaluation.hpp"
#include "pipgan/image_io.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pipgan;
namespace t = pipgan::test;

TEST(Metrics, MatchesTripleLoopOracle) {
    auto gen = make_generator(1);
    for (int i = 0; i < 20; ++i) {
        auto a = torch::rand({3, 4, 4}, gen);
        auto b = torch::rand({3, 4, 4}, gen);
        auto m = image_metrics(a, b);
        auto o = t::metrics_oracle(t::to_vector(a), t::to_vector(b), 3, 4, 4);
        EXPECT_NEAR(m.mse, o.mse, 1e-9);
        EXPECT_NEAR(m.rmse, o.rmse, 1e-9);
        EXPECT_NEAR(m.psnr, o.psnr, 1e-9);
        EXPECT_EQ(m.rmse, std::sqrt(m.mse));
    }
}

TEST(Metrics, IdenticalAndConstantOffset) {
    auto a = torch::full({3, 8, 8}, 0.2, torch::kFloat64);
    auto same = image_metrics(a, a);
    EXPECT_EQ(same.mse, 0.0);
    EXPECT_TRUE(std::isinf(same.psnr));
    auto m = image_metrics(a, a + 0.1);
    EXPECT_NEAR(m.mse, 0.01, 1e-12);
    EXPECT_NEAR(m.rmse, 0.1, 1e-12);
    EXPECT_NEAR(m.psnr, 20.0, 1e-12);
}

TEST(Metrics, SymmetryAndMonotonicity) {
    auto gen = make_generator(2);
    auto target = torch::rand({3, 8, 8}, gen, torch::TensorOptions().dtype(torch::kFloat64));
    auto noise = torch::rand({3, 8, 8}, gen, torch::TensorOptions().dtype(torch::kFloat64)) - 0.5;
    double last_mse = 0, last_psnr = std::numeric_limits<double>::infinity();
    for (double amp : {0.01, 0.05, 0.1, 0.3}) {
        auto noisy = target + amp * noise;
        auto m = image_metrics(noisy, target);
        auto r = image_metrics(target, noisy);
        EXPECT_EQ(m.mse, r.mse);
        EXPECT_GT(m.mse, last_mse);
        EXPECT_LT(m.psnr, last_psnr);
        last_mse = m.mse;
        last_psnr = m.psnr;
    }
    EXPECT_THROW(image_metrics(target, target.narrow(1, 0, 4)), ShapeMismatch);
}

TEST(Report, PerImageThenMeanWithCap) {
    auto report = make_report({{"a", std::numeric_limits<double>::infinity(), 0.0, 0.0}, {"b", 20.0, 0.01, 0.1}});
    EXPECT_EQ(report.n_pairs, 2u);
    EXPECT_DOUBLE_EQ(report.aggregate.psnr, (kPsnrCap + 20.0) / 2);
    EXPECT_DOUBLE_EQ(report.aggregate.mse, 0.005);
    EXPECT_DOUBLE_EQ(report.aggregate.rmse, 0.05);
}

TEST(Report, JensenGapOnRandomReports) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PairMetrics> rows;
        for (int i = 0; i < 1 + trial % 9; ++i) {
            const double mse = u(rng);
            rows.push_back({std::to_string(i), -10 * std::log10(mse), mse, std::sqrt(mse)});
        }
        auto report = make_report(rows);
        EXPECT_LE(report.aggregate.rmse, std::sqrt(report.aggregate.mse) + 1e-15);
    }
}

TEST(Report, CsvRoundTrip) {
    t::TempDir dir;
    auto report = make_report({{"x.png", 21.123456789, 0.0077, std::sqrt(0.0077)}, {"y.png", 30.5, 0.00089, 0.03}});
    write_report_csv(report, dir / "r.csv");
    std::ifstream in(dir / "r.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "pair_id,psnr_db,mse,rmse");
    auto back = read_report_csv(dir / "r.csv");
    ASSERT_EQ(back.per_image.size(), 2u);
    EXPECT_EQ(back.per_image[0].psnr, report.per_image[0].psnr);
    EXPECT_EQ(back.aggregate.mse, report.aggregate.mse);
}

TEST(EvaluatePairs, DirectoryAgainstItselfAndMissing) {
    t::TempDir gen_dir, tgt_dir;
    std::vector<std::string> ids;
    for (int i = 0; i < 24; ++i) {
        const auto id = "img" + std::to_string(i) + ".png";
        save_png(t::random_images(1, 8, static_cast<uint64_t>(i))[0], gen_dir / id);
        save_png(t::random_images(1, 8, static_cast<uint64_t>(i + 100))[0], tgt_dir / id);
        ids.push_back(id);
    }
    auto self = evaluate_pairs(gen_dir.path(), gen_dir.path(), ids);
    EXPECT_EQ(self.n_pairs, 24u);
    EXPECT_EQ(self.aggregate.mse, 0.0);
    EXPECT_EQ(self.aggregate.psnr, kPsnrCap);

    auto scored = evaluate_pairs(gen_dir.path(), tgt_dir.path(), read_pair_ids({}, gen_dir.path()));
    EXPECT_EQ(scored.n_pairs, 24u);
    EXPECT_GT(scored.aggregate.mse, 0.0);

    std::filesystem::remove(tgt_dir / "img3.png");
    std::filesystem::remove(gen_dir / "img7.png");
    try {
        evaluate_pairs(gen_dir.path(), tgt_dir.path(), ids);
        FAIL() << "expected MissingImage";
    } catch (const MissingImage& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("img3.png"), std::string::npos);
        EXPECT_NE(msg.find("img7.png"), std::string::npos);
    }
}

TEST(EvaluatePairs, PairListFile) {
    t::TempDir dir;
    std::ofstream(dir / "pairs.csv") << "pair_id\na.png\nb.png\n";
    EXPECT_EQ(read_pair_ids(dir / "pairs.csv", dir.path()), (std::vector<std::string>{"a.png", "b.png"}));
}

TEST(Ablation, GoldenRow) {
    EXPECT_EQ(format_ablation_row("Ours", {17.0296, 0.01394, 0.1158}), "Ours,17.0296,0.01394,0.1158");
}

TEST(Ablation, EightMethodTableInOrder) {
    const auto& names = ablation_methods();
    ASSERT_EQ(names.size(), 8u);
    EXPECT_EQ(names.front(), "Ours");
    EXPECT_EQ(names.back(), "Pix2pix");
    std::vector<std::pair<std::string, MetricsReport>> entries;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double mse = 0.01 + 0.001 * static_cast<double>(i);
        entries.push_back({names[i], make_report({{"p", -10 * std::log10(mse), mse, std::sqrt(mse)}})});
    }
    auto table = ablation_report(entries);
    std::istringstream csv(table.csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 9u);
    EXPECT_EQ(lines[0], "Method,P-SNR,MSE,R-MSE");
    for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(lines[i + 1].substr(0, names[i].size() + 1), names[i] + ",");
    EXPECT_NE(table.markdown.find("| Method"), std::string::npos);
    EXPECT_NE(table.text.find("PE + Cascade +GP"), std::string::npos);
}

TEST(Ablation, SingleAndInvalidEntries) {
    auto report = make_report({{"p", 20.0, 0.01, 0.1}});
    auto one = ablation_report({{"Ours", report}});
    EXPECT_EQ(one.csv, "Method,P-SNR,MSE,R-MSE\nOurs,20.0000,0.01000,0.1000\n");
    EXPECT_THROW(ablation_report({}), InvalidArgument);
    EXPECT_THROW(ablation_report({{"Ours", report}, {"Ours", report}}), DuplicateMethod);
}
