#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "edgeguard/error.hpp"
#include "edgeguard/pipeline.hpp"
#include "support.hpp"

using namespace edgeguard;
using namespace edgeguard::pipeline;

namespace {

std::vector<std::size_t> count_labels(const std::vector<int>& y, std::span<const std::size_t> idx) {
  std::vector<std::size_t> c(2, 0);
  for (auto i : idx) ++c[static_cast<std::size_t>(y[i])];
  return c;
}

// Solves s = a + u (b - a) for the best pair of minority rows.
bool is_convex_combination(std::span<const double> s, const std::vector<std::vector<double>>& minority) {
  for (const auto& a : minority)
    for (const auto& b : minority) {
      double num = 0.0, den = 0.0;
      for (std::size_t d = 0; d < s.size(); ++d) {
        num += (s[d] - a[d]) * (b[d] - a[d]);
        den += (b[d] - a[d]) * (b[d] - a[d]);
      }
      const double u = den > 0.0 ? num / den : 0.0;
      if (u < 0.0 || u > 1.0) continue;
      double resid = 0.0;
      for (std::size_t d = 0; d < s.size(); ++d) resid = std::max(resid, std::abs(a[d] + u * (b[d] - a[d]) - s[d]));
      if (resid < 1e-9) return true;
    }
  return false;
}

}  // namespace

TEST_CASE("csv: well-formed file") {
  const auto d = parse_csv("id,dur,proto,attack_cat,label\n1,0.5,tcp,Normal,0\n2,1.5,udp,DoS,1\n3,2,tcp,Normal,0\n");
  CHECK(d.rows() == 3);
  CHECK(d.numeric_names == std::vector<std::string>{"dur"});
  CHECK(d.numeric[0] == std::vector<double>{0.5, 1.5, 2.0});
  CHECK(d.categorical_names == std::vector<std::string>{"proto"});
  CHECK(d.categorical[0] == std::vector<std::string>{"tcp", "udp", "tcp"});
  CHECK(d.labels == std::vector<int>{0, 1, 0});
  CHECK(d.ids == std::vector<std::string>{"1", "2", "3"});
  CHECK(d.attack_categories == std::vector<std::string>{"Normal", "DoS", "Normal"});
}

TEST_CASE("csv: quoting, BOM and CRLF") {
  const auto d = parse_csv("\xEF\xBB\xBF" "a,note,label\r\n1,\"x, \"\"y\"\"\",1\r\n2,plain,0\r\n");
  CHECK(d.rows() == 2);
  REQUIRE(d.categorical_names == std::vector<std::string>{"note"});
  CHECK(d.categorical[0][0] == "x, \"y\"");
  CHECK(d.numeric_names == std::vector<std::string>{"a"});
}

TEST_CASE("csv: rejected rows and errors") {
  const auto d = parse_csv("a,b,label\n1,,0\n2,3,1\n");
  CHECK(d.rows() == 1);
  CHECK(d.rejected_missing == 1);

  CHECK_THROWS_AS(parse_csv("a,a,label\n1,2,0\n"), IngestionError);
  try {
    parse_csv("a,b\n1,2\n");
    FAIL("expected an error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("label") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("a,label\n1,2\n"), IngestionError);
  CHECK_THROWS_AS(parse_csv("id,a,label\n1,1,0\n1,2,1\n"), IngestionError);
  CHECK_THROWS_AS(parse_csv("a,label\n1,0\n2\n"), IngestionError);

  Schema s = Schema::from_json({{"a", "numeric"}});
  try {
    parse_csv("a,label\n1,0\nxyz,1\n", s);
    FAIL("expected an error");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'a'") != std::string::npos);
  }
}

TEST_CASE("csv: schema roles") {
  Schema s = Schema::from_json({{"port", "categorical"}, {"junk", "ignore"}, {"y", "label"}});
  const auto d = parse_csv("port,junk,y\n80,,1\n443,x,0\n", s);
  CHECK(d.rows() == 2);
  CHECK(d.categorical_names == std::vector<std::string>{"port"});
  CHECK(d.numeric_names.empty());
  CHECK(d.labels == std::vector<int>{1, 0});
  CHECK_THROWS_AS(Schema::from_json({{"a", "fancy"}}), IngestionError);
}

TEST_CASE("csv: file round trip and concat") {
  const auto dir = oracle::scratch_dir("csv");
  std::ofstream(dir / "a.csv") << "id,x,label\n1,1,0\n2,2,1\n";
  std::ofstream(dir / "b.csv") << "id,x,label\n1,3,1\n";
  const RawDataset parts[] = {load_csv(dir / "a.csv"), load_csv(dir / "b.csv")};
  const auto all = concat(parts);
  CHECK(all.rows() == 3);
  CHECK(all.ids == std::vector<std::string>{"1:1", "1:2", "2:1"});
  CHECK(all.numeric[0] == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(load_csv(dir / "missing.csv"), IngestionError);
}

TEST_CASE("dedup") {
  auto d = parse_csv("x,c,label\n1,a,0\n1,a,0\n");
  std::size_t removed = 0;
  CHECK(dedup(d, &removed).rows() == 1);
  CHECK(removed == 1);

  auto u = parse_csv("x,c,label\n1,a,0\n1,a,1\n1,b,0\n2,a,0\n");
  CHECK(dedup(u, &removed).rows() == 4);
  CHECK(removed == 0);

  // planted duplicates vs a hash-set count
  std::mt19937_64 gen(3);
  std::string csv = "x,y,c,label\n";
  std::set<std::tuple<int, int, std::string, int>> seen;
  std::size_t rows = 0;
  for (int i = 0; i < 500; ++i) {
    const int x = static_cast<int>(gen() % 6), y = static_cast<int>(gen() % 5), l = static_cast<int>(gen() % 2);
    const std::string c = (gen() & 1) ? "p" : "q";
    csv += std::to_string(x) + "," + std::to_string(y) + "," + c + "," + std::to_string(l) + "\n";
    seen.insert({x, y, c, l});
    ++rows;
  }
  const auto planted = dedup(parse_csv(csv), &removed);
  CHECK(planted.rows() == seen.size());
  CHECK(removed == rows - seen.size());
}

TEST_CASE("percentile and winsorization") {
  CHECK(percentile_linear({1, 2, 3, 4, 100}, 95) == doctest::Approx(80.8).epsilon(1e-12));
  CHECK(percentile_linear({5}, 95) == 5);
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);

  const std::vector<double> small{1, 2, 3};
  CHECK_FALSE(winsorize_fit(small).has_value());
  const std::vector<double> outlier{1, 2, 3, 4, 100};
  const auto cap = winsorize_fit(outlier);
  REQUIRE(cap.has_value());
  CHECK(*cap == doctest::Approx(80.8).epsilon(1e-12));
  const std::vector<double> flat{5, 5, 5};
  CHECK_FALSE(winsorize_fit(flat).has_value());

  std::vector<double> col{1, 2, 100};
  winsorize_apply(col, 80.8);
  CHECK(col == std::vector<double>{1, 2, 80.8});
  std::vector<double> same{1, 2, 100};
  winsorize_apply(same, std::nullopt);
  CHECK(same == std::vector<double>{1, 2, 100});
}

TEST_CASE("one-hot vocabulary") {
  const std::vector<std::string> abc{"a", "a", "b"};
  const auto v = onehot_fit(abc, 12);
  CHECK(v.categories == std::vector<std::string>{"a", "b"});
  CHECK(v.output_width() == 1);
  CHECK_FALSE(v.encode("a").has_value());
  CHECK(v.encode("b") == std::optional<std::size_t>(0));
  CHECK_FALSE(v.encode("zzz").has_value());

  // 10 categories with frequencies 10..1
  std::vector<std::string> col;
  std::map<std::string, int> freq;
  for (int c = 0; c < 10; ++c)
    for (int r = 0; r < 10 - c; ++r) {
      col.push_back("c" + std::to_string(c));
      ++freq["c" + std::to_string(c)];
    }
  const auto t = onehot_fit(col, 4);
  CHECK(t.has_other);
  CHECK(t.categories == std::vector<std::string>{"c0", "c1", "c2"});
  CHECK(t.output_width() == 3);  // c1, c2, OTHER
  CHECK(t.encode("c9").has_value());
  CHECK(t.encode("never-seen") == t.encode("c9"));
  CHECK(t.output_names("proto").back() == std::string("proto=") + kOtherCategory);
}

TEST_CASE("standardization") {
  const Tensor2 x = Tensor2::from_rows({{0, 7}, {2, 7}});
  const auto s = scale_fit(x);
  CHECK(s.kept == std::vector<std::size_t>{0});
  CHECK(s.dropped == std::vector<std::size_t>{1});
  CHECK(scale_apply(s, x) == Tensor2::from_rows({{-1}, {1}}));

  std::mt19937_64 gen(2);
  const Tensor2 r = oracle::random_tensor(200, 4, gen, -3, 9);
  const auto sr = scale_fit(r);
  const Tensor2 z = scale_apply(sr, r);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 200; ++i) m += z(i, c);
    m /= 200;
    for (std::size_t i = 0; i < 200; ++i) v += (z(i, c) - m) * (z(i, c) - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(std::abs(std::sqrt(v / 200) - 1.0) < 1e-12);
  }
}

TEST_CASE("stratified split") {
  std::vector<int> y(100, 0);
  std::fill(y.begin(), y.begin() + 60, 1);
  auto s = stratified_split(y, 0.8, 5);
  CHECK(count_labels(y, s.train) == std::vector<std::size_t>{32, 48});
  CHECK(count_labels(y, s.test) == std::vector<std::size_t>{8, 12});

  std::vector<int> small{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  s = stratified_split(small, 0.8, 5);
  CHECK(count_labels(small, s.train) == std::vector<std::size_t>{3, 5});
  CHECK(count_labels(small, s.test) == std::vector<std::size_t>{1, 1});

  const auto a = stratified_split(y, 0.7, 9), b = stratified_split(y, 0.7, 9);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK(std::is_sorted(a.train.begin(), a.train.end()));
  CHECK_THROWS_AS(stratified_split(y, 1.0, 1), ParameterError);
}

TEST_CASE("smote") {
  FeatureMatrix bal;
  bal.x = Tensor2::from_rows({{0}, {1}});
  bal.y = {0, 1};
  bal.feature_names = {"f"};
  CHECK(smote(bal, 5, 1) == bal);

  FeatureMatrix seg;
  seg.x = Tensor2::from_rows({{0, 0}, {1, 1}, {5, 5}, {6, 6}, {7, 7}, {8, 8}});
  seg.y = {1, 1, 0, 0, 0, 0};
  seg.feature_names = {"a", "b"};
  const auto out = smote(seg, 1, 3);
  CHECK(out.count_label(1) == 4);
  CHECK(out.count_label(0) == 4);
  for (std::size_t i = 6; i < out.rows(); ++i) {
    CHECK(out.x(i, 0) == out.x(i, 1));
    CHECK(out.x(i, 0) >= 0.0);
    CHECK(out.x(i, 0) <= 1.0);
  }

  std::mt19937_64 gen(4);
  FeatureMatrix m;
  m.x = oracle::random_tensor(130, 5, gen);
  m.y.assign(130, 0);
  for (std::size_t i = 0; i < 130; i += 4) m.y[i] = (i / 4 < 30) ? 1 : 0;
  for (int i = 0; i < 5; ++i) m.feature_names.push_back("f" + std::to_string(i));
  REQUIRE(m.count_label(1) == 30);
  SmoteReport report;
  const auto o = smote(m, 5, 8, &report);
  CHECK(o.count_label(0) == 100);
  CHECK(o.count_label(1) == 100);
  CHECK(report.synthesized == 70);
  CHECK(report.minority_label == 1);
  for (std::size_t i = 0; i < 130; ++i) CHECK(o.x.row(i)[0] == m.x.row(i)[0]);
  std::vector<std::vector<double>> minority;
  for (std::size_t i = 0; i < 130; ++i)
    if (m.y[i] == 1) minority.emplace_back(m.x.row(i).begin(), m.x.row(i).end());
  std::size_t verified = 0;
  for (std::size_t i = 130; i < o.rows(); ++i) verified += is_convex_combination(o.x.row(i), minority);
  CHECK(verified == 70);
  CHECK(smote(m, 5, 8) == o);
}

TEST_CASE("train statistics are reused on test data") {
  // train ~ small values with an outlier, test drawn from a shifted distribution
  std::string train_csv = "x,proto,label\n", test_csv = "x,proto,label\n";
  for (int i = 0; i < 20; ++i) train_csv += std::to_string(i % 5) + ",tcp," + std::to_string(i % 2) + "\n";
  train_csv += "1000,udp,1\n";
  for (int i = 0; i < 10; ++i) test_csv += std::to_string(500 + i) + ",icmp," + std::to_string(i % 2) + "\n";
  const auto train = parse_csv(train_csv), test = parse_csv(test_csv);
  const auto spec = fit_transform(train, {});
  REQUIRE(spec.caps[0].has_value());
  const double cap = *spec.caps[0];
  const auto tm = apply_transform(spec, test);
  const std::size_t col = 0;
  REQUIRE(spec.scaler.kept[0] == 0);
  for (std::size_t i = 0; i < tm.rows(); ++i) {
    const double raw = std::min(500.0 + static_cast<double>(i), cap);
    CHECK(tm.x(i, col) == doctest::Approx((raw - spec.scaler.mean[0]) / spec.scaler.stddev[0]).epsilon(1e-12));
  }
  // icmp is unseen: with no OTHER bucket it encodes as all zeros
  for (std::size_t i = 0; i < tm.rows(); ++i)
    for (std::size_t c = 1; c < tm.dims(); ++c)
      CHECK(tm.x(i, c) == doctest::Approx(-spec.scaler.mean[c] / spec.scaler.stddev[c]));
}

TEST_CASE("transform spec serializes") {
  const auto d = parse_csv("x,p,label\n1,a,0\n2,b,1\n30,a,1\n4,c,0\n5,a,0\n6,b,1\n7,a,0\n8,a,1\n9,a,0\n10,a,1\n11,a,0\n200,b,1\n");
  const auto spec = fit_transform(d, {});
  CHECK(TransformSpec::from_json(spec.to_json()) == spec);
  CHECK(apply_transform(spec, d).dims() == spec.output_names.size());
}

TEST_CASE("pipeline options") {
  const auto o = PipelineOptions::from_json({{"percentile", 90}, {"max_categories", 6}});
  CHECK(o.percentile == 90);
  CHECK(o.max_categories == 6);
  CHECK(o.split_ratio == 0.8);
  CHECK(PipelineOptions::from_json(o.to_json()).to_json() == o.to_json());
  CHECK_THROWS_AS(PipelineOptions::from_json({{"split_ratio", 1.5}}), ConfigError);
  CHECK_THROWS_AS(PipelineOptions::from_json({{"percentile_method", "nearest"}}), ConfigError);
}

TEST_CASE("preprocess is deterministic and balanced") {
  SyntheticOptions so;
  so.rows = 600;
  so.dims = 6;
  so.categorical_columns = 1;
  so.heavy_tail_columns = 1;
  so.positive_fraction = 0.3;
  const auto raw = parse_csv(synthetic_csv(so));
  CHECK(raw.rows() == 600);
  const auto a = preprocess(raw, {}, 42), b = preprocess(raw, {}, 42);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.audit == b.audit);
  CHECK(a.train.count_label(0) == a.train.count_label(1));
  CHECK(a.test.rows() == 120);
  CHECK(a.audit.at("rows_loaded") == 600);
  const auto& t = a.audit.at("split").at("test");
  CHECK(t.at("benign").get<std::size_t>() + t.at("attack").get<std::size_t>() == 120);
  CHECK(a.train.dims() == a.spec.output_names.size());
  const auto c = preprocess(raw, {}, 43);
  CHECK_FALSE(c.test == a.test);
}

TEST_CASE("synthetic fixture") {
  SyntheticOptions so;
  so.rows = 1000;
  so.dims = 4;
  so.positive_fraction = 0.45;
  const std::string text = synthetic_csv(so);
  CHECK(text == synthetic_csv(so));
  const auto d = parse_csv(text);
  CHECK(d.rows() == 1000);
  CHECK(d.numeric_names.size() == 4);
  std::size_t pos = 0;
  for (int l : d.labels) pos += static_cast<std::size_t>(l);
  CHECK(pos == 450);
}

TEST_CASE("feature matrix container") {
  const auto dir = oracle::scratch_dir("egfm");
  FeatureMatrix m;
  m.x = Tensor2::from_rows({{1.5, -2}, {0, 3}});
  m.y = {1, 0};
  m.feature_names = {"a", "b"};
  m.attack_tags = std::vector<std::string>{"DoS", "Normal"};
  save_feature_matrix(m, dir / "m.egfm");
  CHECK(load_feature_matrix(dir / "m.egfm") == m);

  {
    std::fstream f(dir / "m.egfm", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(load_feature_matrix(dir / "m.egfm"), FormatError);
  CHECK_THROWS_AS(load_feature_matrix(dir / "none.egfm"), FormatError);
}
