#include <doctest.h>

#include <random>

#include "drugsent/corpus.hpp"
#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"
#include "support/fixtures.hpp"

using namespace drugsent;

TEST_CASE("bin_rating partitions 1..10 into the three classes") {
    for (int r = 1; r <= 4; ++r) CHECK(bin_rating(r) == SentimentClass::Negative);
    for (int r = 5; r <= 8; ++r) CHECK(bin_rating(r) == SentimentClass::Neutral);
    for (int r = 9; r <= 10; ++r) CHECK(bin_rating(r) == SentimentClass::Positive);
    CHECK_THROWS_AS(bin_rating(0), std::invalid_argument);
    CHECK_THROWS_AS(bin_rating(11), std::invalid_argument);

    // monotone non-decreasing in class code
    int prev = 0;
    for (int r = 1; r <= 10; ++r) {
        const int code = static_cast<int>(bin_rating(r));
        CHECK(code >= prev);
        prev = code;
    }
}

TEST_CASE("clean_text decodes double-encoded entities") {
    CHECK(clean_text("it&amp;#039;s great") == "it's great");
    CHECK(clean_text("plain text") == "plain text");
    CHECK(clean_text("a\t b\n  c") == "a b c");
    CHECK(clean_text("  padded  ") == "padded");
    CHECK(clean_text("5 &gt; 4 &amp; 3 &lt; 4") == "5 > 4 & 3 < 4");
    CHECK(clean_text("x&quot;y&quot;") == "x\"y\"");
    CHECK(clean_text("A&nbsp;B") == "A B");
    CHECK(clean_text("she said &ldquo;hi&rdquo;") ==
          "she said “hi”");
    CHECK(clean_text("&#x27;quoted&#x27;") == "'quoted'");
    CHECK(clean_text("") == "");
    CHECK(clean_text(" \t\n ") == "");
    // unknown/malformed entities pass through
    CHECK(clean_text("&notanentity;") == "&notanentity;");
    CHECK(clean_text("AT&T") == "AT&T");
    // control characters are dropped, casing is preserved
    CHECK(clean_text("MiXeD\x01 CaSe") == "MiXeD CaSe");
}

TEST_CASE("clean_text is idempotent on randomized entity soup") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> pieces = {
        "&amp;", "&amp;amp;", "&#039;", "&amp;#039;", "&lt;", "&gt;",
        "word",  " ",          "\t",     "\x02",       "&",    ";",
        "#039;", "&quot;",     "x",      "&#38;#039;", "&am",  "p;"};
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        const std::size_t n = rng() % 12;
        for (std::size_t i = 0; i < n; ++i) {
            s += pieces[rng() % pieces.size()];
        }
        const std::string once = clean_text(s);
        CHECK(clean_text(once) == once);
    }
}

TEST_CASE("load_raw parses the seven-column layout") {
    const auto dir = testing::fresh_dir("corpus_load_raw");

    SUBCASE("header only yields an empty sequence") {
        const auto path = dir / "empty.tsv";
        write_file(path,
                   "\tdrugName\tcondition\treview\trating\tdate\tusefulCount\n");
        CHECK(load_raw(path).empty());
    }

    SUBCASE("rows parse in order, ratings narrow from 9.0 style") {
        const auto path = dir / "ok.tsv";
        write_file(path,
                   "uniqueID\tdrugName\tcondition\treview\trating\tdate"
                   "\tusefulCount\n"
                   "1\tA\tCond\tgood stuff\t9.0\tMay 1, 2015\t3\n"
                   "2\tB\t\t\"quoted\treview\"\t4\tJune 2, 2016\t0\n");
        const auto rows = load_raw(path);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].unique_id == "1");
        CHECK(rows[0].rating == 9);
        CHECK(rows[1].rating == 4);
        CHECK(rows[1].condition.empty());
        CHECK(rows[1].review_text == "quoted\treview");
    }

    SUBCASE("out-of-range rating names the row") {
        const auto path = dir / "bad_rating.tsv";
        write_file(path,
                   "uniqueID\tdrugName\tcondition\treview\trating\tdate"
                   "\tusefulCount\n"
                   "1\tA\tC\tfine\t7\td\t0\n"
                   "2\tA\tC\tbad\t11\td\t0\n");
        CHECK_THROWS_WITH_AS(load_raw(path),
                             doctest::Contains("row 2"), DataError);
    }

    SUBCASE("skip policy keeps the good rows") {
        const auto path = dir / "skip.tsv";
        write_file(path,
                   "uniqueID\tdrugName\tcondition\treview\trating\tdate"
                   "\tusefulCount\n"
                   "1\tA\tC\tfine\t7\td\t0\n"
                   "2\tA\tC\tbad\televen\td\t0\n"
                   "3\tA\tC\talso fine\t2\td\t0\n");
        const auto rows = load_raw(path, BadRowPolicy::Skip);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].unique_id == "1");
        CHECK(rows[1].unique_id == "3");
    }

    SUBCASE("wrong column count is a row error") {
        const auto path = dir / "columns.tsv";
        write_file(path,
                   "uniqueID\tdrugName\tcondition\treview\trating\tdate"
                   "\tusefulCount\n"
                   "1\tA\tC\tfine\t7\td\n");
        CHECK_THROWS_AS(load_raw(path), DataError);
    }

    SUBCASE("unexpected header is rejected") {
        const auto path = dir / "header.tsv";
        write_file(path, "a\tb\tc\td\te\tf\tg\n");
        CHECK_THROWS_AS(load_raw(path), DataError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_raw(dir / "nope.tsv"), DataError);
    }

    SUBCASE("empty review text is a row error") {
        const auto path = dir / "empty_review.tsv";
        write_file(path,
                   "uniqueID\tdrugName\tcondition\treview\trating\tdate"
                   "\tusefulCount\n"
                   "1\tA\tC\t  \t7\td\t0\n");
        CHECK_THROWS_AS(load_raw(path), DataError);
    }
}

TEST_CASE("class_counts tallies each class") {
    CHECK(class_counts({}) == ClassCounts{0, 0, 0});
    auto corpus = testing::make_synth_corpus(5, 1);
    const auto counts = class_counts(corpus);
    CHECK(counts.negative == 5);
    CHECK(counts.neutral == 5);
    CHECK(counts.positive == 5);
    CHECK(counts.total() == corpus.size());
}

TEST_CASE("stratified_subsample") {
    const auto corpus = testing::make_synth_corpus(40, 3);

    SUBCASE("fraction 1.0 returns the input unchanged") {
        const auto out = stratified_subsample(corpus, 1.0, 9);
        REQUIRE(out.size() == corpus.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].unique_id == corpus[i].unique_id);
        }
    }

    SUBCASE("per-class floor sizes") {
        const auto out = stratified_subsample(corpus, 0.25, 9);
        const auto counts = class_counts(out);
        CHECK(counts.negative == 10);
        CHECK(counts.neutral == 10);
        CHECK(counts.positive == 10);
    }

    SUBCASE("five percent of the official train-split sizes") {
        // class sizes 40075/42702/78520 -> floor(0.05 * n) per class
        std::vector<int> labels;
        labels.insert(labels.end(), 40075, 0);
        labels.insert(labels.end(), 42702, 1);
        labels.insert(labels.end(), 78520, 2);
        const auto picked = stratified_sample_indices(labels, 0.05, 42);
        std::size_t counts[3] = {0, 0, 0};
        for (std::size_t i : picked) ++counts[labels[i]];
        CHECK(counts[0] == 2003);
        CHECK(counts[1] == 2135);
        CHECK(counts[2] == 3926);
    }

    SUBCASE("floor property holds for arbitrary fractions") {
        const auto before = class_counts(corpus);
        for (double f : {0.07, 0.33, 0.5, 0.99}) {
            const auto after = class_counts(stratified_subsample(corpus, f, 5));
            for (int c = 0; c < 3; ++c) {
                CHECK(after[c] == static_cast<std::size_t>(std::floor(
                                      f * static_cast<double>(before[c]))));
            }
        }
    }

    SUBCASE("deterministic and order-preserving") {
        const auto a = stratified_subsample(corpus, 0.5, 11);
        const auto b = stratified_subsample(corpus, 0.5, 11);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].unique_id == b[i].unique_id);
        }
        // order preserved: positions in the original corpus ascend
        std::size_t cursor = 0;
        for (const auto& ex : a) {
            while (cursor < corpus.size() &&
                   corpus[cursor].unique_id != ex.unique_id) {
                ++cursor;
            }
            CHECK(cursor < corpus.size());
        }
    }

    SUBCASE("different seeds differ") {
        const auto a = stratified_subsample(corpus, 0.5, 1);
        const auto b = stratified_subsample(corpus, 0.5, 2);
        bool same = a.size() == b.size();
        if (same) {
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i].unique_id != b[i].unique_id) {
                    same = false;
                    break;
                }
            }
        }
        CHECK_FALSE(same);
    }

    SUBCASE("empty input stays empty") {
        CHECK(stratified_subsample({}, 0.5, 1).empty());
    }

    SUBCASE("bad fraction") {
        CHECK_THROWS_AS(stratified_subsample(corpus, 0.0, 1),
                        std::invalid_argument);
        CHECK_THROWS_AS(stratified_subsample(corpus, 1.5, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("prepared files round-trip") {
    const auto dir = testing::fresh_dir("corpus_prepared");
    const auto corpus = testing::make_synth_corpus(6, 4);
    const auto path = dir / "prepared.tsv";
    write_prepared(corpus, path);
    const auto back = load_prepared(path);
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back[i].unique_id == corpus[i].unique_id);
        CHECK(back[i].text == corpus[i].text);
        CHECK(back[i].label == corpus[i].label);
        CHECK(back[i].original_rating == corpus[i].original_rating);
    }

    SUBCASE("label outside 0..2 is rejected") {
        write_file(dir / "bad.tsv",
                   "unique_id\ttext\tlabel\toriginal_rating\n"
                   "1\thello\t3\t9\n");
        CHECK_THROWS_AS(load_prepared(dir / "bad.tsv"), DataError);
    }
}

TEST_CASE("to_labeled bins and cleans") {
    RawReview raw;
    raw.unique_id = "77";
    raw.review_text = "it&amp;#039;s   ok";
    raw.rating = 6;
    const auto ex = to_labeled(raw);
    CHECK(ex.text == "it's ok");
    CHECK(ex.label == SentimentClass::Neutral);
    CHECK(ex.original_rating == 6);
}
