#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "deontic/corpus.hpp"
#include "deontic/rng.hpp"
#include "oracles.hpp"

using namespace deontic;
using namespace deontic::corpus;

namespace {

std::string random_string(Rng& rng, std::size_t max_len) {
  std::string s(rng.below(max_len + 1), 'a');
  for (char& c : s) c = static_cast<char>('a' + rng.below(4));
  return s;
}

}  // namespace

TEST_CASE("levenshtein basics") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("same", "same") == 0);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  const std::vector<std::string> a = {"the", "Supplier", "shall"}, b = {"the", "Customer", "shall", "not"};
  CHECK(levenshtein(a, b) == 2);
  CHECK(similarity("", "") == 1.0);
  CHECK(similarity("abcd", "abce") == 0.75);
}

TEST_CASE("levenshtein matches the full-table oracle") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const std::string a = random_string(rng, 12), b = random_string(rng, 12);
    CHECK(levenshtein(a, b) == testing::levenshtein_dp(a, b));
  }
}

TEST_CASE("bounded levenshtein agrees with the full table") {
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const std::string a = random_string(rng, 12), b = random_string(rng, 12);
    const std::size_t d = levenshtein(a, b);
    const std::size_t limit = rng.below(10);
    const auto bounded = levenshtein_bounded(std::string_view(a), std::string_view(b), limit);
    if (d <= limit) {
      REQUIRE(bounded.has_value());
      CHECK(*bounded == d);
    } else {
      CHECK_FALSE(bounded.has_value());
    }
  }
}

TEST_CASE("single-linkage clustering") {
  CHECK(cluster_texts({"identical text", "identical text"}, 1.0).clusters.size() == 1);
  CHECK(cluster_texts({"aaaa", "bbbb", "cccc"}, 0.5).clusters.size() == 3);
  // A~B and B~C but not A~C still gives one cluster.
  const std::vector<std::string> chain = {"aaaaaaaaaa", "aaaaaaabbb", "aaaabbbbbb"};
  CHECK(similarity(chain[0], chain[2]) < 0.7);
  CHECK(similarity(chain[0], chain[1]) >= 0.7);
  CHECK(similarity(chain[1], chain[2]) >= 0.7);
  auto t = cluster_texts(chain, 0.7);
  CHECK(t.clusters.size() == 1);
  CHECK(t.clusters[0] == std::vector<int>{0, 1, 2});
  auto tok = cluster_texts({"the party shall pay", "the party shall not pay", "nothing alike here at all"}, 0.75,
                           DistanceLevel::Token);
  CHECK(tok.clusters.size() == 2);
  CHECK_THROWS(cluster_texts({"a"}, 0.0));
}

TEST_CASE("split assignment") {
  ClusterTable giant;
  giant.clusters = {{0, 1, 2}};
  giant.cluster_of = {0, 0, 0};
  auto g = assign_splits(giant, {1, 1, 1}, {0.7, 0.18, 0.12}, 1);
  CHECK(std::all_of(g.of_section.begin(), g.of_section.end(), [&](Split s) { return s == g.of_section[0]; }));
  CHECK_FALSE(g.warnings.empty());

  ClusterTable singletons;
  for (int i = 0; i < 1000; ++i) {
    singletons.clusters.push_back({i});
    singletons.cluster_of.push_back(i);
  }
  std::vector<std::size_t> w(1000, 1);
  auto a = assign_splits(singletons, w, {0.7, 0.18, 0.12}, 3);
  std::array<int, 3> n{};
  for (auto s : a.of_section) ++n[static_cast<std::size_t>(s)];
  CHECK(std::abs(n[0] / 1000.0 - 0.70) <= 0.02);
  CHECK(std::abs(n[1] / 1000.0 - 0.18) <= 0.02);
  CHECK(std::abs(n[2] / 1000.0 - 0.12) <= 0.02);
  CHECK(assign_splits(singletons, w, {0.7, 0.18, 0.12}, 3).of_section == a.of_section);
  CHECK_THROWS(assign_splits(singletons, w, {0.7, 0.2, 0.2}, 3));
}

TEST_CASE("synthetic corpus") {
  SynthStats stats;
  auto c = generate_synthetic(200, 9, {}, &stats);
  CHECK(c == generate_synthetic(200, 9));
  CHECK(c.sections.size() == 200);
  for (const auto& sec : c.sections) {
    CHECK(sec.sentences.size() >= 1);
    CHECK(sec.sentences.size() <= text::kMaxSectionSentences);
    // The splitter recovers exactly the generated sentences.
    const auto segs = text::split_sentences(sec.joined_text());
    REQUIRE(segs.size() == sec.sentences.size());
    for (std::size_t i = 0; i < segs.size(); ++i) CHECK(segs[i].text == sec.sentences[i].text);
  }
  for (auto n : stats.label_counts) CHECK(n > 0);
  CHECK(stats.label_counts[0] + stats.label_counts[1] > c.sentence_count() / 2);
  CHECK(static_cast<double>(stats.intro_dependent_items) >= 0.1 * static_cast<double>(stats.list_items));

  // Labels follow the recipe: items under a negative intro are prohibitions,
  // locally negated items are prohibitions, others obligations.
  for (const auto& sec : c.sections) {
    std::optional<bool> negative_intro;
    for (const auto& s : sec.sentences) {
      if (s.gold == text::ClassLabel::ObligationListIntro) {
        negative_intro = s.text.find(" not") != std::string::npos;
      } else if (s.gold == text::ClassLabel::ObligationListItem) {
        CHECK(negative_intro == false);
        CHECK(s.tokens[1].surface != "not");
      } else if (s.gold == text::ClassLabel::ProhibitionListItem) {
        REQUIRE(negative_intro.has_value());
        CHECK((*negative_intro || s.tokens[1].surface == "not"));
      }
    }
  }
}

TEST_CASE("near-duplicate injection") {
  auto c = generate_synthetic(20, 2);
  auto pairs = inject_near_duplicates(c, 10, 0.9, 5);
  CHECK(c.sections.size() == 30);
  for (auto [a, b] : pairs)
    CHECK(similarity(c.sections[static_cast<std::size_t>(a)].joined_text(), c.sections[static_cast<std::size_t>(b)].joined_text()) >= 0.9);
}

TEST_CASE("JSONL round trip and errors") {
  auto c = generate_synthetic(15, 4);
  auto path = std::filesystem::temp_directory_path() / "deontic_corpus_test.jsonl";
  write_corpus(c, path);
  CHECK(read_corpus(path) == c);
  CHECK(parse_corpus("").sections.empty());

  try {
    parse_corpus("{\"doc_id\":\"d\",\"sentences\":[]}\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("section_id") != std::string::npos);
  }
  try {
    parse_corpus("\n{not json\n", "x.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("x.jsonl:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_corpus(R"({"doc_id":"d","section_id":"s","sentences":[{"text":"a","tokens":[{"w":"a","pos":"QQ"}]}]})"),
                  ParseError);

  // Tokens and labels are optional; raw sections go through the pipeline.
  auto raw = parse_corpus(R"({"doc_id":"d","section_id":"s","text":"The Supplier shall: (a) pay; (b) not sell.","labels":["ObligationListIntro","ObligationListItem","ProhibitionListItem"]})");
  REQUIRE(raw.sections.size() == 1);
  CHECK(raw.sections[0].sentences.size() == 3);
  auto bare = parse_corpus(R"({"doc_id":"d","section_id":"s","sentences":[{"text":"Each Party shall pay."}]})");
  CHECK(bare.sections[0].sentences[0].tokens.size() == 5);
  CHECK_FALSE(bare.sections[0].sentences[0].gold.has_value());
}

TEST_CASE("modal and negation vocabulary") {
  CHECK(is_modal_or_negation("shall"));
  CHECK(is_modal_or_negation("Not"));
  CHECK(is_modal_or_negation("No"));
  CHECK_FALSE(is_modal_or_negation("Supplier"));
}
