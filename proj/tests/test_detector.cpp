#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "ghostmark/detector.hpp"
#include "ghostmark/errors.hpp"
#include "ghostmark/lexicon.hpp"
#include "naive_scan.hpp"

using namespace ghostmark;
using ghostmark::testing::agrees_with_detector;
using ghostmark::testing::naive_scan;

namespace {

Marker make_marker(std::string id, std::string pattern, Variety v = Variety::IndianEnglish,
                   Category c = Category::Lexical) {
  Marker m;
  m.id = std::move(id);
  m.pattern = std::move(pattern);
  m.variety = v;
  m.category = c;
  return m;
}

Lexicon seed_lexicon() { return load_lexicon(GHOSTMARK_DATA_DIR "/seed_lexicon.json"); }

}  // namespace

TEST_CASE("detects single markers case-insensitively on word boundaries") {
  Lexicon lex = Lexicon::from_markers({make_marker("k", "kindly")}, "v");

  DetectionResult hit = detect("KINDLY send the files.", lex);
  REQUIRE(hit.occurrences.size() == 1);
  CHECK(hit.occurrences[0].marker_id == "k");
  CHECK(hit.occurrences[0].start == 0);
  CHECK(hit.occurrences[0].end == 6);
  CHECK(hit.occurrences[0].surface == "KINDLY");

  CHECK(detect("unkindly worded", lex).occurrences.empty());
  CHECK(detect("kindlyness", lex).occurrences.empty());
  CHECK(detect("(kindly)", lex).occurrences.size() == 1);
  CHECK(detect("kindly, thanks", lex).occurrences.size() == 1);
}

TEST_CASE("apostrophes count as word characters") {
  Lexicon lex = Lexicon::from_markers({make_marker("l", "lah", Variety::SingaporeanEnglish)},
                                      "v");
  CHECK(detect("ok lah", lex).occurrences.size() == 1);
  CHECK(detect("ok lah's", lex).occurrences.empty());
  CHECK(detect("ok 'lah", lex).occurrences.empty());
}

TEST_CASE("hyphens break words") {
  Lexicon lex = Lexicon::from_markers({make_marker("g", "go slow", Variety::NigerianEnglish)},
                                      "v");
  // The pattern space must match a real space, not a hyphen
  CHECK(detect("the go slow on third mainland", lex).occurrences.size() == 1);
  CHECK(detect("go-slow", lex).occurrences.empty());
}

TEST_CASE("multi-token patterns match across collapsed whitespace") {
  Lexicon lex = Lexicon::from_markers({make_marker("d", "do the needful")}, "v");
  CHECK(detect("please do the needful", lex).occurrences.size() == 1);
  CHECK(detect("please do  the\tneedful", lex).occurrences.size() == 1);
  CHECK(detect("please do\nthe needful", lex).occurrences.size() == 1);
  CHECK(detect("please do their needful", lex).occurrences.empty());
}

TEST_CASE("spans are byte offsets into the normalized text") {
  Lexicon lex = Lexicon::from_markers({make_marker("k", "kindly")}, "v");
  // é is two bytes; marker starts after "café " = 6 codepoints, 7 bytes
  DetectionResult r = detect("caf\xc3\xa9  kindly", lex);
  CHECK(r.normalized_text == "caf\xc3\xa9 kindly");
  REQUIRE(r.occurrences.size() == 1);
  CHECK(r.occurrences[0].start == 6);
  CHECK(r.occurrences[0].end == 12);
  CHECK(r.occurrences[0].surface == "kindly");
}

TEST_CASE("patterns with accents match NFD input") {
  Lexicon lex = Lexicon::from_markers({make_marker("c", "caf\xc3\xa9 corner")}, "v");
  // Decomposed e + combining acute in the text still matches the NFC pattern
  CHECK(detect("meet at the caf\x65\xcc\x81 corner now", lex).occurrences.size() == 1);
}

TEST_CASE("overlapping candidates resolve leftmost-longest") {
  Lexicon lex = Lexicon::from_markers(
      {make_marker("short", "revert"), make_marker("long", "revert back")}, "v");
  DetectionResult r = detect("please revert back soon", lex);
  REQUIRE(r.occurrences.size() == 1);
  CHECK(r.occurrences[0].marker_id == "long");

  DetectionResult r2 = detect("please revert soon", lex);
  REQUIRE(r2.occurrences.size() == 1);
  CHECK(r2.occurrences[0].marker_id == "short");
}

TEST_CASE("equal-span ties go to the earlier lexicon entry") {
  Lexicon lex = Lexicon::from_markers(
      {make_marker("first", "lah", Variety::IndianEnglish),
       make_marker("second", "lah", Variety::SingaporeanEnglish)},
      "v");
  DetectionResult r = detect("ok lah", lex);
  REQUIRE(r.occurrences.size() == 1);
  CHECK(r.occurrences[0].marker_id == "first");
}

TEST_CASE("variety filter restricts candidate markers") {
  Lexicon lex = seed_lexicon();
  std::string text = "Kindly chope a table, my dear.";

  DetectionResult all = detect(text, lex);
  CHECK(all.occurrences.size() == 3);

  DetectionResult indian = detect(text, lex, VarietyFilter{{Variety::IndianEnglish}});
  REQUIRE(indian.occurrences.size() == 1);
  CHECK(indian.occurrences[0].marker_id == "in-kindly");

  DetectionResult two = detect(
      text, lex, VarietyFilter{{Variety::SingaporeanEnglish, Variety::NigerianEnglish}});
  CHECK(two.occurrences.size() == 2);
}

TEST_CASE("count_by_category tallies detected markers") {
  Lexicon lex = seed_lexicon();
  DetectionResult r = detect("Kindly prepone the meeting and revert back.", lex);
  REQUIRE(r.occurrences.size() == 3);
  CHECK(r.count_by_category.at(Variety::IndianEnglish, Category::Pragmatic) == 1);
  CHECK(r.count_by_category.at(Variety::IndianEnglish, Category::Lexical) == 1);
  CHECK(r.count_by_category.at(Variety::IndianEnglish, Category::Syntactic) == 1);
  CHECK(count_markers(r) == 3);
}

TEST_CASE("repeated markers are all counted") {
  Lexicon lex = Lexicon::from_markers({make_marker("k", "kindly")}, "v");
  DetectionResult r = detect("kindly wait, kindly respond, and kindly confirm", lex);
  CHECK(r.occurrences.size() == 3);
}

TEST_CASE("detector matches the naive reference scanner on random inputs") {
  std::mt19937 rng(20260823);
  const std::vector<std::string> pattern_pool = {
      "kindly",      "do the needful", "do",        "the needful", "revert back",
      "revert",      "lah",            "go slow",   "caf\xc3\xa9", "can or not",
      "my dear",     "needful",        "a1",        "slow",        "prepone"};
  const std::vector<std::string> token_pool = {
      "kindly", "do",   "the",  "needful", "revert", "back", "lah",  "go",
      "slow",   "can",  "or",   "not",     "my",     "dear", "a1",   "x",
      "caf\xc3\xa9",    "it's", "so",      "ok",     "now",  "team", "prepone"};
  const std::vector<std::string> glue_pool = {" ", " ", " ", ", ", ". ", " & ", "  ", "-"};

  std::uniform_int_distribution<std::size_t> n_markers(1, 6);
  std::uniform_int_distribution<std::size_t> n_tokens(0, 18);
  std::uniform_int_distribution<std::size_t> pick_pattern(0, pattern_pool.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_token(0, token_pool.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_glue(0, glue_pool.size() - 1);

  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Marker> markers;
    std::set<std::string> used;
    std::size_t want = n_markers(rng);
    while (markers.size() < want) {
      std::string pattern = pattern_pool[pick_pattern(rng)];
      if (!used.insert(pattern).second) continue;
      markers.push_back(make_marker("m" + std::to_string(markers.size()), pattern));
    }
    Lexicon lex = Lexicon::from_markers(std::move(markers), "fuzz");

    std::string text;
    std::size_t tokens = n_tokens(rng);
    for (std::size_t i = 0; i < tokens; ++i) {
      if (i > 0) text += glue_pool[pick_glue(rng)];
      text += token_pool[pick_token(rng)];
    }

    DetectionResult detected = detect(text, lex);
    auto naive = naive_scan(text, lex);
    CAPTURE(text);
    CHECK(agrees_with_detector(detected, naive));
  }
}

TEST_CASE("agreement_kappa computes Cohen's kappa") {
  std::vector<int> a{0, 0, 1, 1, 0, 1, 0, 1, 1, 0};
  std::vector<int> b{0, 1, 1, 1, 0, 1, 0, 0, 1, 0};
  // observed agreement 0.8, chance agreement 0.5
  CHECK(agreement_kappa(a, b) == doctest::Approx(0.6).epsilon(1e-12));

  std::vector<int> same{1, 0, 1, 1};
  CHECK(agreement_kappa(same, same) == doctest::Approx(1.0));

  CHECK_THROWS_AS(agreement_kappa(std::vector<int>{1}, std::vector<int>{1, 0}),
                  ValidationError);
  CHECK_THROWS_AS(agreement_kappa(std::vector<int>{}, std::vector<int>{}), ValidationError);
}
