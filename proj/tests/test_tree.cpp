#include <gtest/gtest.h>

#include <random>
#include <string>

#include "json.hpp"
#include "ost/synthgen.hpp"
#include "ost/tree.hpp"

using namespace ost;
using nlohmann::json;

namespace {

FeatureSchema tiny_schema() {
  FeatureSchema s;
  s.features.push_back({"size", FeatureKind::numeric, {}});
  s.features.push_back({"color", FeatureKind::nominal, {"red", "green", "blue"}});
  return s;
}

Leaf make_leaf(double es) {
  Leaf l;
  l.expected_survival = es;
  l.n_train = 10;
  l.theta = 1.0;
  l.curve.jump_times = {1.0, 3.0};
  l.curve.values = {0.9, 0.6};
  return l;
}

// size < 5 ? (color in {green} ? 8 : 6) : 3
SurvivalTree tiny_tree() {
  SurvivalTree t;
  t.schema = tiny_schema();
  Split root;
  root.feature = 0;
  root.threshold = 5.0;
  root.missing = Branch::right;
  Split inner;
  inner.feature = 1;
  inner.kind = FeatureKind::nominal;
  inner.left_levels = {1};
  inner.missing = Branch::left;
  t.nodes.push_back({root, 1, 4});
  t.nodes.push_back({inner, 2, 3});
  t.nodes.push_back({make_leaf(8.0)});
  t.nodes.push_back({make_leaf(6.0)});
  t.nodes.push_back({make_leaf(3.0)});
  t.fit = {2, 5, 0.25, 42};
  return t;
}

json doc_of(const SurvivalTree& t) { return json::parse(serialize(t)); }

void expect_parse_error(const json& doc, const std::string& fragment) {
  try {
    deserialize(doc.dump());
    FAIL() << "accepted: " << fragment;
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Route, FollowsPredicates) {
  const auto t = tiny_tree();
  EXPECT_EQ(route(t, std::vector<double>{4.9, 1}), 2u);
  EXPECT_EQ(route(t, std::vector<double>{4.9, 0}), 3u);
  EXPECT_EQ(route(t, std::vector<double>{5.0, 1}), 4u);
  EXPECT_EQ(route(t, std::vector<double>{kMissing, 1}), 4u);
  EXPECT_EQ(route(t, std::vector<double>{1.0, kMissing}), 2u);
  EXPECT_DOUBLE_EQ(predict_expected_survival(t, std::vector<double>{0.0, 2}), 6.0);
}

TEST(Route, RejectsBadInput) {
  const auto t = tiny_tree();
  EXPECT_THROW(route(t, std::vector<double>{1.0}), ShapeError);
  EXPECT_THROW(route(t, std::vector<double>{1.0, 3}), UnknownLevel);
  EXPECT_THROW(route(t, std::vector<double>{1.0, 0.5}), UnknownLevel);
}

TEST(Tree, Counts) {
  const auto t = tiny_tree();
  EXPECT_EQ(t.depth(), 2);
  EXPECT_EQ(t.split_count(), 2u);
  EXPECT_EQ(t.leaf_count(), 3u);
  EXPECT_EQ(t.split_features(), (std::vector<std::size_t>{0, 1}));
}

TEST(Tree, LeafMembersPartitionRows) {
  const auto pop = sample_population(400, 9);
  const auto ds = population_dataset(pop);
  const auto members = leaf_members(pop.model.tree, ds);
  std::vector<int> seen(ds.size(), 0);
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (!pop.model.tree.nodes[k].is_leaf()) {
      EXPECT_TRUE(members[k].empty());
    }
    for (auto i : members[k]) {
      ++seen[i];
      EXPECT_EQ(k, pop.planted_leaf[i]);
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Serialize, RoundTripIsExact) {
  for (const auto& t : {tiny_tree(), planted_model().tree, planted_model(PlantedVariant::flat).tree}) {
    const auto text = serialize(t);
    const auto back = deserialize(text);
    EXPECT_TRUE(structurally_equal(t, back, 1e-11));
    EXPECT_EQ(serialize(back), text);
  }
}

TEST(Serialize, ProvenanceIsStoredAndIgnored) {
  const auto t = tiny_tree();
  const auto text = serialize(t, json{{"tool", "x"}});
  EXPECT_EQ(json::parse(text)["provenance"]["tool"], "x");
  EXPECT_TRUE(structurally_equal(deserialize(text), t));
}

TEST(Serialize, RandomTreesRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    auto t = tiny_tree();
    t.fit.alpha = u(rng) * 100;
    std::get<Split>(t.nodes[0].body).threshold = u(rng) * 10;
    for (auto& n : t.nodes)
      if (n.is_leaf()) {
        auto& l = std::get<Leaf>(n.body);
        l.expected_survival = u(rng) * 10;
        l.theta = u(rng) * 3;
        l.curve.values = {1 - u(rng) * 0.3, 0.5 * u(rng)};
      }
    EXPECT_TRUE(structurally_equal(deserialize(serialize(t)), t, 1e-11));
  }
}

TEST(StructurallyEqual, DetectsDifferences) {
  const auto a = tiny_tree();
  auto b = a;
  EXPECT_TRUE(structurally_equal(a, b));
  std::get<Split>(b.nodes[0].body).threshold = 6.0;
  EXPECT_FALSE(structurally_equal(a, b));
  b = a;
  std::get<Leaf>(b.nodes[3].body).expected_survival = 6.5;
  EXPECT_FALSE(structurally_equal(a, b));
  b = a;
  b.fit.seed = 1;
  EXPECT_FALSE(structurally_equal(a, b));
}

TEST(Deserialize, MalformedDocuments) {
  const auto good = doc_of(tiny_tree());
  EXPECT_THROW(deserialize("{not json"), ParseError);

  auto d = good;
  d["format"] = "other";
  expect_parse_error(d, "document.format");
  d = good;
  d["version"] = 2;
  expect_parse_error(d, "document.version");
  d = good;
  d.erase("nodes");
  expect_parse_error(d, "nodes");
  d = good;
  d["nodes"][1]["split"]["threshold"] = 1.0;
  expect_parse_error(d, "threshold on nominal feature 'color'");
  d = good;
  d["nodes"][0]["split"]["left_levels"] = {"red"};
  expect_parse_error(d, "level subset on numeric feature 'size'");
  d = good;
  d["nodes"][1]["split"]["left_levels"] = {"purple"};
  expect_parse_error(d, "unknown level 'purple'");
  d = good;
  d["nodes"][1]["split"]["left_levels"] = {"red", "green", "blue"};
  expect_parse_error(d, "proper subset");
  d = good;
  d["nodes"][0]["split"]["feature"] = "weight";
  expect_parse_error(d, "unknown feature 'weight'");
  d = good;
  d["nodes"][0]["right"] = 2;
  expect_parse_error(d, "exactly one parent");
  d = good;
  d["nodes"][0]["left"] = 9;
  expect_parse_error(d, "out of preorder range");
  d = good;
  d["nodes"][2]["leaf"]["curve"]["values"] = {0.5, 0.7};
  expect_parse_error(d, "survival probability");
  d = good;
  d["nodes"][2]["leaf"]["curve"]["times"] = {1.0};
  expect_parse_error(d, "differ in length");
  d = good;
  d["nodes"][2]["leaf"]["n_train"] = -1;
  expect_parse_error(d, "n_train");
  d = good;
  d["nodes"][3]["id"] = 7;
  expect_parse_error(d, "nodes[3].id");
}
