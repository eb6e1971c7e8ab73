#include <gtest/gtest.h>

#include "pipgan/config.hpp"
#include "pipgan/errors.hpp"
#include "support/fixtures.hpp"

using namespace pipgan;

TEST(Config, ParsesSectionsCommentsAndQuotes) {
    auto c = Config::parse(
        "seed = 3\n"
        "# comment\n"
        "[train]\n"
        "learning_rate = 0.0002 ; trailing\n"
        "name = \"a b\"\n"
        "[loss]\n"
        "xi5=50\n");
    EXPECT_EQ(c.get_int("seed", 0), 3);
    EXPECT_DOUBLE_EQ(c.get_double("train.learning_rate", 0), 2e-4);
    EXPECT_EQ(c.get_string("train.name", ""), "a b");
    EXPECT_DOUBLE_EQ(c.get_double("loss.xi5", 0), 50.0);
    EXPECT_FALSE(c.contains("loss.xi4"));
    EXPECT_DOUBLE_EQ(c.get_double("loss.xi4", 10.0), 10.0);
}

TEST(Config, ListsAndBooleans) {
    auto c = Config::parse("a = x, y ,z\nb = true\nc = 0\n");
    EXPECT_EQ(c.get_list("a"), (std::vector<std::string>{"x", "y", "z"}));
    EXPECT_TRUE(c.get_bool("b", false));
    EXPECT_FALSE(c.get_bool("c", true));
}

TEST(Config, SerializeRoundTripKeepsHash) {
    auto c = Config::parse("[b]\nk = 2\n[a]\nk = 1\n");
    auto again = Config::parse(c.serialize());
    EXPECT_EQ(again.entries(), c.entries());
    EXPECT_EQ(again.hash(), c.hash());
    EXPECT_EQ(c.hash().size(), 16u);

    pipgan::test::TempDir dir;
    c.save(dir / "c.toml");
    EXPECT_EQ(Config::load(dir / "c.toml").hash(), c.hash());
}

TEST(Config, HashChangesWithAnyValue) {
    auto c = Config::parse("a = 1\n");
    auto d = Config::parse("a = 2\n");
    EXPECT_NE(c.hash(), d.hash());
}

TEST(Config, Fnv1aKnownVectors) {
    // Published FNV-1a 64 test vectors.
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Config, MergeOverwrites) {
    auto c = Config::parse("a = 1\nb = 2\n");
    c.merge(Config::parse("b = 3\nc = 4\n"));
    EXPECT_EQ(c.get_int("a", 0), 1);
    EXPECT_EQ(c.get_int("b", 0), 3);
    EXPECT_EQ(c.get_int("c", 0), 4);
}

TEST(Config, BadNumberIsAnError) {
    auto c = Config::parse("a = abc\n");
    EXPECT_THROW(c.get_double("a", 0), Error);
    EXPECT_THROW(Config::load("/nonexistent/pipgan.toml"), Error);
}
