#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "sdglab/systems.hpp"
#include "test_util.hpp"

using namespace sdgl;
using testutil::TempDir;

namespace {

Dataset make_dataset(std::vector<std::pair<std::string, std::string>> docs, std::string name = "ds") {
  std::vector<Document> out;
  for (auto& [id, text] : docs) out.emplace_back(id, text);
  return Dataset(std::move(name), DatasetKind::Unlabeled, std::move(out));
}

SystemDefinition one_query_system(const std::string& name, int sdg, const std::string& query) {
  return SystemDefinition{name, {SystemEntry{sdg, "q1", parse_query(query)}}};
}

ErrorCode system_error(const std::string& path) {
  try {
    load_systems(path);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << path;
  return ErrorCode::Corrupt;
}

}  // namespace

TEST(LoadSystem, ParsesRows) {
  TempDir dir;
  const auto path = dir.file("demo.csv",
                             "system,sdg,query_id,query\n"
                             "demo,1,q1,\"poverty OR destitution\"\n"
                             "demo,6,q2,water NEAR/2 sanitation\n");
  const auto sys = load_system(path);
  EXPECT_EQ(sys.name, "demo");
  ASSERT_EQ(sys.entries.size(), 2u);
  EXPECT_EQ(sys.entries[0].sdg, 1);
  EXPECT_EQ(sys.entries[0].query.kind(), NodeKind::Or);
  EXPECT_EQ(sys.entries[1].query.kind(), NodeKind::Near);
}

TEST(LoadSystem, Errors) {
  TempDir dir;
  EXPECT_EQ(system_error(dir.file("a.csv", "system,sdg,query_id,query\nd,1,q1,a\nd,2,q1,b\n")), ErrorCode::Schema);
  EXPECT_EQ(system_error(dir.file("b.csv", "system,sdg,query_id,query\nd,0,q1,a\n")), ErrorCode::Schema);
  EXPECT_EQ(system_error(dir.file("c.csv", "system,sdg,query_id,query\nd,18,q1,a\n")), ErrorCode::Schema);
  EXPECT_EQ(system_error(dir.file("d.csv", "system,sdg,query\nd,1,a\n")), ErrorCode::Schema);
  EXPECT_EQ(system_error(dir.file("e.csv", "system,sdg,query_id,query\n")), ErrorCode::Schema);
  EXPECT_EQ(system_error(dir.path("nope.csv")), ErrorCode::Io);
  EXPECT_EQ(system_error(dir.file("f.csv", "system,sdg,query_id,query\nd,1,q1,\"(a OR\"\n")), ErrorCode::Syntax);
  EXPECT_EQ(system_error(dir.file("g.csv", "system,sdg,query_id,query\nd,1,q1,(a AND b) NEAR/1 c\n")),
            ErrorCode::NearOperand);
}

TEST(LoadSystem, SyntaxErrorNamesSystemAndQuery) {
  TempDir dir;
  const auto path = dir.file("s.csv", "system,sdg,query_id,query\nalpha,3,health_q,health AND\n");
  try {
    load_systems(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Syntax);
    EXPECT_NE(e.message().find("alpha"), std::string::npos);
    EXPECT_NE(e.message().find("health_q"), std::string::npos);
  }
}

TEST(LoadSystem, SeveralSystemsPerFileAndSameIdsAcrossSystems) {
  TempDir dir;
  const auto path = dir.file("multi.csv", "system,sdg,query_id,query\nb,1,q1,x\na,2,q1,y\nb,3,q2,z\n");
  const auto systems = load_systems(path);
  ASSERT_EQ(systems.size(), 2u);
  EXPECT_EQ(systems[0].name, "b");
  EXPECT_EQ(systems[0].entries.size(), 2u);
  EXPECT_EQ(systems[1].name, "a");
  EXPECT_THROW(load_system(path), Error);
}

TEST(Detect, Examples) {
  const auto ds = make_dataset({{"d1", "end poverty now"}});
  const auto hits = detect(ds, {one_query_system("s", 1, "poverty")});
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].sdg, 1);
  EXPECT_EQ(hits[0].doc_id, "d1");

  const auto empty = make_dataset({{"e", ""}});
  EXPECT_TRUE(detect(empty, {one_query_system("s", 1, "poverty OR hunger AND food")}).empty());

  // position-pair check: water@0, sanitation@1, distance 1
  const auto ws = make_dataset({{"w", "water sanitation"}});
  EXPECT_EQ(detect(ws, {one_query_system("s", 6, "water NEAR/1 sanitation")}).size(), 1u);
  EXPECT_EQ(detect(ws, {one_query_system("s", 6, "water NEAR/0 sanitation")}).size(), 0u);
}

TEST(Detect, SortedAndDeterministicAcrossThreadCounts) {
  std::vector<std::pair<std::string, std::string>> docs;
  std::mt19937_64 rng(4);
  const std::vector<std::string> words{"water", "health", "poverty", "food", "energy", "x", "y"};
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (int k = 0; k < 20; ++k) text += words[rng() % words.size()] + " ";
    docs.emplace_back("doc" + std::to_string(199 - i), text);
  }
  const auto ds = make_dataset(docs);
  SystemDefinition a{"zeta",
                     {{3, "h", parse_query("health")}, {1, "p", parse_query("poverty AND NOT food")},
                      {6, "w", parse_query("water NEAR/2 (health OR energy)")}}};
  SystemDefinition b{"alpha", {{7, "e", parse_query("energy")}, {2, "f", parse_query("food")}}};
  const auto h1 = detect(ds, {a, b}, 1);
  const auto h4 = detect(ds, {a, b}, 4);
  EXPECT_EQ(h1, h4);
  EXPECT_EQ(h1, detect(ds, {a, b}, 1));
  EXPECT_TRUE(std::is_sorted(h1.begin(), h1.end(), [](const Hit& x, const Hit& y) { return x.key() < y.key(); }));
  EXPECT_FALSE(h1.empty());
}

TEST(Detect, PureOrSystemFiresOnAnySingleKeyword) {
  const auto sys = one_query_system("sdsn", 2, "hunger OR famine OR malnutrition OR \"food security\"");
  for (const char* text : {"the hunger games", "a famine", "malnutrition rates", "food security policy"}) {
    const auto ds = make_dataset({{"d", text}});
    EXPECT_EQ(detect(ds, {sys}).size(), 1u) << text;
  }
}

TEST(ToMatrix, CollapsesHits) {
  const auto ds = make_dataset({{"d1", "a"}, {"d2", "b"}});
  std::vector<Hit> hits{{"d1", "s", 1, "q1", {}}, {"d1", "s", 1, "q2", {}}};
  const auto m = to_matrix(hits, ds, std::vector<std::string>{"s"});
  EXPECT_TRUE(m.get(0, 0, 1));
  for (int g = 2; g <= 17; ++g) EXPECT_FALSE(m.get(0, 0, g));
  EXPECT_TRUE(m.predicted(1, 0).empty());
  EXPECT_TRUE(m.present(1, 0));

  const auto none = to_matrix({}, ds, std::vector<std::string>{"s"});
  EXPECT_TRUE(none.predicted(0, 0).empty());
  EXPECT_TRUE(none.predicted(1, 0).empty());
}

TEST(ToMatrix, MatrixTrueIffHitExists) {
  const auto ds = make_dataset({{"d1", "health water"}, {"d2", "food"}, {"d3", ""}});
  SystemDefinition s{"s", {{3, "a", parse_query("health")}, {6, "b", parse_query("water")}, {2, "c", parse_query("food")},
                           {6, "d", parse_query("water OR food")}}};
  const auto hits = detect(ds, {s});
  auto m = to_matrix(hits, ds, {s});
  // merge an external fragment and check the invariant for the keyword system
  PredictionMatrix ext(ds);
  ext.assign(0, ext.add_system("ext"), 9);
  m.merge(ext);
  for (std::size_t d = 0; d < ds.size(); ++d) {
    for (int g = 1; g <= 17; ++g) {
      const bool any = std::any_of(hits.begin(), hits.end(), [&](const Hit& h) {
        return h.doc_id == ds.documents()[d].id && h.sdg == g;
      });
      EXPECT_EQ(m.get(d, 0, g), any);
    }
  }
  EXPECT_TRUE(m.get(0, 1, 9));
  EXPECT_EQ(m.predicted(0, 1), SdgSet{9});
}

TEST(ImportExternal, Examples) {
  TempDir dir;
  const auto ds = make_dataset({{"d1", "x"}, {"d2", "y"}});
  const auto m = import_external_predictions(dir.file("p.csv", "doc_id,sdg\nd1,3\nd1,7\n"), "osdg", ds);
  EXPECT_EQ(m.predicted(0, 0), (SdgSet{3, 7}));
  EXPECT_TRUE(m.predicted(1, 0).empty());

  const auto empty = import_external_predictions(dir.file("e.csv", ""), "osdg", ds);
  EXPECT_TRUE(empty.predicted(0, 0).empty());
  EXPECT_TRUE(empty.present(0, 0));

  EXPECT_THROW(import_external_predictions(dir.file("bad.csv", "doc_id,sdg\nd9,21\n"), "osdg", ds), Error);
  try {
    import_external_predictions(dir.file("bad2.csv", "doc_id,sdg\nd1,21\n"), "osdg", ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Schema);
  }
}

TEST(ImportExternal, UnknownDocPolicy) {
  TempDir dir;
  const auto ds = make_dataset({{"d1", "x"}});
  const auto path = dir.file("p.csv", "doc_id,sdg\nghost,4\nd1,5\n");
  EXPECT_THROW(import_external_predictions(path, "ext", ds), Error);
  std::vector<std::string> warnings;
  const auto m = import_external_predictions(path, "ext", ds, UnknownDocPolicy::Warn, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(m.predicted(0, 0), SdgSet{5});
}

TEST(KeywordFrequencies, Examples) {
  const auto two = make_dataset({{"a", "good health"}, {"b", "health first"}});
  const auto sys = one_query_system("s", 3, "health OR wellbeing");
  EXPECT_EQ(keyword_frequencies(detect(two, {sys})), (std::vector<KeywordCount>{{"s", "health", 2}}));
  EXPECT_TRUE(keyword_frequencies({}).empty());

  const std::string text = "health is wealth and health care needs health workers";
  const auto one = make_dataset({{"a", text}});
  std::size_t scanned = 0;
  for (const auto& t : tokenize(text)) scanned += t == "health";
  const auto table = keyword_frequencies(detect(one, {sys}));
  ASSERT_EQ(table.size(), 1u);
  EXPECT_EQ(table[0].count, scanned);
  EXPECT_EQ(table[0].count, 3u);
}

TEST(KeywordFrequencies, SortedDescendingPerSystem) {
  const auto ds = make_dataset({{"a", "water water water energy health"}});
  SystemDefinition s1{"s1", {{6, "w", parse_query("water OR energy")}}};
  SystemDefinition s2{"s2", {{3, "h", parse_query("health AND water")}}};
  const auto table = keyword_frequencies(detect(ds, {s1, s2}));
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[0], (KeywordCount{"s1", "water", 3}));
  EXPECT_EQ(table[1], (KeywordCount{"s2", "water", 3}));
  for (std::size_t i = 1; i < table.size(); ++i) EXPECT_GE(table[i - 1].count, table[i].count);
}

TEST(PredictionsCsv, RoundTrip) {
  TempDir dir;
  const auto ds = make_dataset({{"d1", "health water"}, {"d,2", "food"}}, "news");
  SystemDefinition s{"s", {{3, "a", parse_query("health")}, {6, "b", parse_query("water")}}};
  const auto m = to_matrix(detect(ds, {s}), ds, {s});
  std::ostringstream out;
  write_predictions_csv_header(out);
  write_predictions_csv(out, "news", m);
  const auto path = dir.file("pred.csv", out.str());
  const auto loaded = load_predictions_csv(path, {&ds});
  EXPECT_EQ(loaded.at("news"), m);
}
