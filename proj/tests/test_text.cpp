#include <doctest.h>

#include "deontic/text.hpp"

using namespace deontic::text;

namespace {

std::vector<std::string> texts(const std::vector<Segment>& segs) {
  std::vector<std::string> out;
  for (const auto& s : segs) out.push_back(s.text);
  return out;
}

const char* kReceiving =
    "The Receiving Party will: (i) keep any Confidential Information strictly confidential; "
    "(ii) not disclose any Confidential Information to any person other than in accordance with "
    "Clause 13.3; and (iii) not use any Confidential Information other than for the purposes of "
    "this Agreement.";

}  // namespace

TEST_CASE("clause lists split into intro and items") {
  auto supplier = split_sentences(
      "The Supplier shall: (a) only process the Personal Data in accordance with Client's written "
      "instructions; (b) not transfer any Personal Data outside the EEA.");
  REQUIRE(supplier.size() == 3);
  CHECK(supplier[0].text == "The Supplier shall:");
  CHECK(supplier[1].text.starts_with("(a) only process"));
  CHECK(supplier[2].text.starts_with("(b) not transfer"));

  auto receiving = split_sentences(kReceiving);
  REQUIRE(receiving.size() == 4);
  CHECK(receiving[0].text == "The Receiving Party will:");
  CHECK(receiving[3].text.starts_with("(iii) not use"));
}

TEST_CASE("plain sentences") {
  CHECK(texts(split_sentences("Details shall be determined in the individual contracts.")) ==
        std::vector<std::string>{"Details shall be determined in the individual contracts."});
  CHECK(split_sentences("   \n\t ").empty());
  auto two = split_sentences("The Term begins today. Each Party shall pay its own costs.");
  CHECK(two.size() == 2);
  // Abbreviations, initials and decimals do not end a sentence.
  CHECK(split_sentences("See e.g. Clause 4.2 for details. Mr. J. Smith signs.").size() == 2);
}

TEST_CASE("spans point back into the source text") {
  const std::string src = kReceiving;
  for (const auto& seg : split_sentences(src))
    CHECK(src.substr(seg.span.begin, seg.span.end - seg.span.begin) == seg.text);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("shall not:") == std::vector<std::string>{"shall", "not", ":"});
  CHECK(tokenize("(a) only process") == std::vector<std::string>{"(a)", "only", "process"});
  CHECK(tokenize("Clauses 13.3;") == std::vector<std::string>{"Clauses", "13.3", ";"});
  CHECK(tokenize("(see the Schedule), and") ==
        std::vector<std::string>{"(", "see", "the", "Schedule", ")", ",", "and"});
  CHECK(tokenize("\"Services\" means") == std::vector<std::string>{"\"", "Services", "\"", "means"});
}

TEST_CASE("shapes") {
  CHECK(compute_shape("ABC") == Shape::AllCaps);
  CHECK(compute_shape("2018") == Shape::AllDigits);
  CHECK(compute_shape("Supplier") == Shape::InitCap);
  CHECK(compute_shape("shall") == Shape::AllLower);
  CHECK(compute_shape("(iii)") == Shape::ListMarker);
  CHECK(compute_shape(";") == Shape::Punct);
  CHECK(compute_shape("13.3") == Shape::Other);
  CHECK(compute_shape("B2B") == Shape::MixedAlnum);
  for (int s = 0; s < kNumShapes; ++s) CHECK(parse_shape(shape_name(static_cast<Shape>(s))) == static_cast<Shape>(s));
}

TEST_CASE("POS tagging") {
  CHECK(tag_pos({"shall"}) == std::vector<std::string>{"MD"});
  CHECK(tag_pos({"not"}) == std::vector<std::string>{"RB"});
  auto tags = tag_pos(tokenize("The Supplier shall not transfer any Personal Data;"));
  for (const auto& t : tags) CHECK(pos_index(t) >= 0);
  CHECK(tags[4] == "VB");
  CHECK(pos_index("XYZ") == -1);
  auto tokens = make_tokens({"foo", "bar"}, {"NN", "VBZ"});
  CHECK(tokens[0].pos == "NN");
  CHECK(tokens[1].pos == "VBZ");
}

TEST_CASE("assemble_section aligns labels") {
  using L = ClassLabel;
  auto secs = assemble_section("d1", "s1", kReceiving,
                               {L::ObligationListIntro, L::ObligationListItem, L::ProhibitionListItem,
                                L::ProhibitionListItem});
  REQUIRE(secs.size() == 1);
  REQUIRE(secs[0].sentences.size() == 4);
  CHECK(secs[0].sentences[0].gold == L::ObligationListIntro);
  CHECK(secs[0].sentences[3].gold == L::ProhibitionListItem);

  auto unlabeled = assemble_section("d1", "s1", kReceiving);
  for (const auto& s : unlabeled[0].sentences) CHECK_FALSE(s.gold.has_value());

  try {
    assemble_section("d1", "sec-9", kReceiving, {L::None});
    FAIL("expected AlignmentError");
  } catch (const AlignmentError& e) {
    CHECK(std::string(e.what()).find("sec-9") != std::string::npos);
  }
}

TEST_CASE("long sentences are truncated") {
  std::string text;
  for (int i = 0; i < 200; ++i) text += "word ";
  text += "end.";
  auto secs = assemble_section("d", "s", text);
  REQUIRE(secs[0].sentences.size() == 1);
  CHECK(secs[0].sentences[0].tokens.size() == kMaxSentenceTokens);
  CHECK(secs[0].sentences[0].truncated);
}

TEST_CASE("long sections are chunked") {
  std::string text;
  for (int i = 0; i < 20; ++i) text += "Sentence number " + std::to_string(i) + " is here. ";
  auto secs = assemble_section("d", "s", text);
  REQUIRE(secs.size() == 2);
  CHECK(secs[0].sentences.size() == kMaxSectionSentences);
  CHECK(secs[1].sentences.size() == 5);
  CHECK(secs[0].section_id == "s#1");
  CHECK(secs[1].section_id == "s#2");
}

TEST_CASE("label names round-trip") {
  for (int k = 0; k < kNumClasses; ++k) {
    const auto l = label_from_index(k);
    CHECK(parse_label(label_name(l)) == l);
    CHECK(label_index(l) == k);
  }
  CHECK_FALSE(parse_label("Permission").has_value());
}
