#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <oodkit/data.hpp>
#include <oodkit/io_util.hpp>

using namespace oodkit;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("oodkit_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SyntheticSpec cluster_spec() {
  SyntheticSpec s;
  s.kind = SyntheticKind::gaussian_clusters;
  s.means = {{-2.0, 0.0}, {2.0, 0.0}, {0.0, 3.0}};
  s.scales = {0.5};
  s.n = 3000;
  s.seed = 41;
  s.name = "clusters";
  return s;
}

void write_idx_pair(const fs::path& img_path, const fs::path& lab_path,
                    const std::vector<unsigned char>& pixels,
                    const std::vector<unsigned char>& labels, unsigned h, unsigned w) {
  auto be32 = [](std::string& s, unsigned v) {
    s.push_back(static_cast<char>((v >> 24) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>(v & 0xff));
  };
  const unsigned n = static_cast<unsigned>(labels.size());
  std::string img;
  be32(img, 0x803);
  be32(img, n);
  be32(img, h);
  be32(img, w);
  img.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  std::ofstream(img_path, std::ios::binary) << img;
  std::string lab;
  be32(lab, 0x801);
  be32(lab, n);
  lab.append(reinterpret_cast<const char*>(labels.data()), labels.size());
  std::ofstream(lab_path, std::ios::binary) << lab;
}

}  // namespace

TEST_CASE("gaussian clusters: labels, balance, moments, determinism") {
  const Dataset d = gen_synthetic(cluster_spec());
  REQUIRE(d.size() == 3000);
  REQUIRE(d.dim() == 2);
  REQUIRE(d.num_known_classes == 3);

  std::vector<std::size_t> counts(3, 0);
  std::vector<double> mean_x(3, 0.0), mean_y(3, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    ++counts[d.y[i]];
    mean_x[d.y[i]] += d.X(i, 0);
    mean_y[d.y[i]] += d.X(i, 1);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    REQUIRE(counts[c] == 1000);  // round-robin balance
    REQUIRE(std::abs(mean_x[c] / counts[c] - cluster_spec().means[c][0]) < 0.08);
    REQUIRE(std::abs(mean_y[c] / counts[c] - cluster_spec().means[c][1]) < 0.08);
  }

  const Dataset d2 = gen_synthetic(cluster_spec());
  REQUIRE(d.X.values == d2.X.values);
  SyntheticSpec other = cluster_spec();
  other.seed = 42;
  REQUIRE(gen_synthetic(other).X.values != d.X.values);
}

TEST_CASE("ring samples live in the annulus and pure-outlier sets have K=0") {
  SyntheticSpec s;
  s.kind = SyntheticKind::ring;
  s.r_inner = 3.0;
  s.r_outer = 5.0;
  s.center = {1.0, -1.0};
  s.n = 2000;
  s.seed = 7;
  const Dataset d = gen_synthetic(s);
  REQUIRE(d.num_known_classes == 0);
  REQUIRE(d.abstain_index() == 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double dx = d.X(i, 0) - 1.0, dy = d.X(i, 1) + 1.0;
    const double r = std::sqrt(dx * dx + dy * dy);
    REQUIRE(r >= 3.0);
    REQUIRE(r <= 5.0);
  }
}

TEST_CASE("uniform box respects bounds per dimension") {
  SyntheticSpec s;
  s.kind = SyntheticKind::uniform_box;
  s.box_lo = {-1.0, 10.0, 0.0};
  s.box_hi = {1.0, 12.0, 0.5};
  s.n = 500;
  s.seed = 8;
  const Dataset d = gen_synthetic(s);
  REQUIRE(d.dim() == 3);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(d.X(i, j) >= s.box_lo[j]);
      REQUIRE(d.X(i, j) < s.box_hi[j]);
    }
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec s = cluster_spec();
  s.n = 0;
  REQUIRE_THROWS_AS(gen_synthetic(s), SpecError);
  s = cluster_spec();
  s.scales = {0.5, 0.5};  // neither 1 nor one-per-cluster (3)
  REQUIRE_THROWS_AS(gen_synthetic(s), SpecError);
  s = cluster_spec();
  s.means[1] = {1.0};  // mixed dimension
  REQUIRE_THROWS_AS(gen_synthetic(s), SpecError);
  SyntheticSpec ring;
  ring.kind = SyntheticKind::ring;
  ring.r_inner = 5.0;
  ring.r_outer = 3.0;
  ring.n = 10;
  REQUIRE_THROWS_AS(gen_synthetic(ring), SpecError);
}

TEST_CASE("IDX round trip with value scaling and bounds") {
  TempDir tmp;
  const std::vector<unsigned char> pixels = {0, 128, 255, 64,  32, 16, 250, 5,
                                             90, 200, 7,  255, 0,  0,  1,   2};
  const std::vector<unsigned char> labels = {2, 0, 1, 2};
  write_idx_pair(tmp.path / "img", tmp.path / "lab", pixels, labels, 2, 2);
  const Dataset d = load_idx((tmp.path / "img").string(), (tmp.path / "lab").string());
  REQUIRE(d.size() == 4);
  REQUIRE(d.dim() == 4);
  REQUIRE(d.num_known_classes == 3);
  REQUIRE(d.X(0, 0) == 0.0);
  REQUIRE(d.X(0, 1) == 128.0 / 255.0);
  REQUIRE(d.X(0, 2) == 1.0);
  REQUIRE(d.y == std::vector<std::size_t>{2, 0, 1, 2});
  REQUIRE(d.value_bounds.has_value());
  REQUIRE((*d.value_bounds)[0] == 0.0);
  REQUIRE((*d.value_bounds)[1] == 1.0);
}

TEST_CASE("IDX loader rejects bad magic, count mismatch, truncation") {
  TempDir tmp;
  const std::vector<unsigned char> pixels(8, 100);
  const std::vector<unsigned char> labels = {0, 1};
  write_idx_pair(tmp.path / "img", tmp.path / "lab", pixels, labels, 2, 2);

  // bad image magic
  {
    std::fstream f(tmp.path / "img", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put(static_cast<char>(0x99));
  }
  try {
    load_idx((tmp.path / "img").string(), (tmp.path / "lab").string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    REQUIRE(std::string(e.what()).find("byte 0") != std::string::npos);
  }

  // label count mismatch
  write_idx_pair(tmp.path / "img2", tmp.path / "lab2", pixels, labels, 2, 2);
  write_idx_pair(tmp.path / "img3", tmp.path / "lab3", {1, 2, 3, 4}, {0}, 2, 2);
  REQUIRE_THROWS_AS(load_idx((tmp.path / "img2").string(), (tmp.path / "lab3").string()),
                    FormatError);

  // truncated pixel payload
  {
    std::ofstream f(tmp.path / "img4", std::ios::binary);
    std::string s;
    auto be32 = [&](unsigned v) {
      s.push_back(static_cast<char>((v >> 24) & 0xff));
      s.push_back(static_cast<char>((v >> 16) & 0xff));
      s.push_back(static_cast<char>((v >> 8) & 0xff));
      s.push_back(static_cast<char>(v & 0xff));
    };
    be32(0x803);
    be32(2);
    be32(2);
    be32(2);
    s += "\x01\x02\x03";  // 3 of 8 payload bytes
    f << s;
  }
  REQUIRE_THROWS_AS(load_idx((tmp.path / "img4").string(), (tmp.path / "lab2").string()),
                    FormatError);
  REQUIRE_THROWS_AS(load_idx((tmp.path / "missing").string(), (tmp.path / "lab2").string()),
                    IoError);
}

TEST_CASE("CSV round trip with and without labels") {
  TempDir tmp;
  const fs::path p = tmp.path / "d.csv";
  write_file_atomic(p, "x1,x2,label\n1.5,-2.25,0\n0.125,3.5,2\n-1,0.75,1\n");
  const Dataset d = load_csv(p.string(), "label");
  REQUIRE(d.size() == 3);
  REQUIRE(d.dim() == 2);
  REQUIRE(d.num_known_classes == 3);
  REQUIRE(d.X(0, 0) == 1.5);
  REQUIRE(d.X(1, 1) == 3.5);
  REQUIRE(d.y == std::vector<std::size_t>{0, 2, 1});

  const Dataset unl = load_csv(p.string());
  REQUIRE(unl.dim() == 3);  // label column read as a feature
  REQUIRE(unl.num_known_classes == 0);
}

TEST_CASE("CSV loader errors carry line and column context") {
  TempDir tmp;
  const fs::path p = tmp.path / "bad.csv";
  write_file_atomic(p, "a,b\n1.0,2.0\n1.0,oops\n");
  try {
    load_csv(p.string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("line 3") != std::string::npos);
    REQUIRE(msg.find("'b'") != std::string::npos);
  }
  write_file_atomic(p, "a,b\n1.0\n");
  REQUIRE_THROWS_AS(load_csv(p.string()), FormatError);  // ragged row
  write_file_atomic(p, "a,b\n1.0,2.5\n");
  REQUIRE_THROWS_AS(load_csv(p.string(), "label"), FormatError);  // missing label col
  write_file_atomic(p, "a,label\n1.0,-1\n");
  REQUIRE_THROWS_AS(load_csv(p.string(), "label"), FormatError);  // negative label
  write_file_atomic(p, "");
  REQUIRE_THROWS_AS(load_csv(p.string()), FormatError);  // no header
}

TEST_CASE("relabel_as_abstain and select_classes") {
  const Dataset d = gen_synthetic(cluster_spec());
  const Dataset ab = relabel_as_abstain(d, 5);
  REQUIRE(ab.num_known_classes == 5);
  for (std::size_t y : ab.y) REQUIRE(y == 5);

  const Dataset sel = select_classes(d, {2, 0});
  REQUIRE(sel.num_known_classes == 2);
  REQUIRE(sel.size() == 2000);
  std::set<std::size_t> seen(sel.y.begin(), sel.y.end());
  REQUIRE(seen == std::set<std::size_t>{0, 1});
  // class 2 of the source mapped to 0: its mean moves with it
  double mx = 0.0;
  std::size_t n0 = 0;
  for (std::size_t i = 0; i < sel.size(); ++i)
    if (sel.y[i] == 0) {
      mx += sel.X(i, 1);
      ++n0;
    }
  REQUIRE(std::abs(mx / n0 - 3.0) < 0.1);  // source class 2 sat at y=3

  REQUIRE_THROWS_AS(select_classes(d, {}), SpecError);
  REQUIRE_THROWS_AS(select_classes(d, {9}), IndexError);
}

TEST_CASE("concat stacks rows in order and checks compatibility") {
  const Dataset d = gen_synthetic(cluster_spec());
  const Dataset ab = relabel_as_abstain(gen_synthetic(cluster_spec()), 3);
  const Dataset joined = concat(d, ab);
  REQUIRE(joined.size() == 6000);
  REQUIRE(joined.y[0] == d.y[0]);
  REQUIRE(joined.y[3000] == 3);

  Dataset mismatched = ab;
  mismatched.num_known_classes = 4;
  REQUIRE_THROWS_AS(concat(d, mismatched), ShapeError);
}

TEST_CASE("standardizer: zero mean, unit variance, floor for constant columns") {
  Dataset d = gen_synthetic(cluster_spec());
  // add a constant column by hand
  Matrix wide(d.size(), 3);
  for (std::size_t i = 0; i < d.size(); ++i) {
    wide(i, 0) = d.X(i, 0);
    wide(i, 1) = d.X(i, 1);
    wide(i, 2) = 7.0;
  }
  d.X = wide;
  const Standardizer s = fit_standardizer(d);
  REQUIRE(s.std_dev[2] == kStdFloor);
  const Dataset z = apply_standardizer(s, d);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) mean += z.X(i, j);
    mean /= static_cast<double>(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      var += (z.X(i, j) - mean) * (z.X(i, j) - mean);
    var /= static_cast<double>(z.size());
    REQUIRE(std::abs(mean) < 1e-10);
    REQUIRE(var == Catch::Approx(1.0).margin(1e-9));
  }
  REQUIRE_FALSE(z.value_bounds.has_value());
  REQUIRE_THROWS_AS(apply_standardizer(s, gen_synthetic(cluster_spec())), ShapeError);
}

TEST_CASE("split: exact sizes, disjoint union, seed determinism") {
  const Dataset d = gen_synthetic(cluster_spec());
  const std::vector<Dataset> parts = split(d, {0.5, 0.3, 0.2}, 99);
  REQUIRE(parts.size() == 3);
  REQUIRE(parts[0].size() == 1500);
  REQUIRE(parts[1].size() == 900);
  REQUIRE(parts[2].size() == 600);

  // disjoint cover: multiset of first coordinates matches the source
  std::vector<double> all;
  for (const Dataset& p : parts)
    for (std::size_t i = 0; i < p.size(); ++i) all.push_back(p.X(i, 0));
  std::vector<double> src;
  for (std::size_t i = 0; i < d.size(); ++i) src.push_back(d.X(i, 0));
  std::sort(all.begin(), all.end());
  std::sort(src.begin(), src.end());
  REQUIRE(all == src);

  const std::vector<Dataset> again = split(d, {0.5, 0.3, 0.2}, 99);
  REQUIRE(parts[1].X.values == again[1].X.values);
  REQUIRE_THROWS_AS(split(d, {0.5, 0.4}, 1), SpecError);   // doesn't sum to 1
  REQUIRE_THROWS_AS(split(d, {}, 1), SpecError);
}

TEST_CASE("split sizes stay within 1 of exact for awkward fractions") {
  SyntheticSpec s = cluster_spec();
  s.n = 1000;  // 1000/3 is not integral
  const Dataset d = gen_synthetic(s);
  const std::vector<Dataset> parts = split(d, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 5);
  std::size_t total = 0;
  for (const Dataset& p : parts) {
    REQUIRE(p.size() >= 333);
    REQUIRE(p.size() <= 334);
    total += p.size();
  }
  REQUIRE(total == 1000);
}

TEST_CASE("subsample and take_rows") {
  const Dataset d = gen_synthetic(cluster_spec());
  const Dataset sub = subsample(d, 100, 13);
  REQUIRE(sub.size() == 100);
  REQUIRE(sub.num_known_classes == d.num_known_classes);
  const Dataset sub2 = subsample(d, 100, 13);
  REQUIRE(sub.X.values == sub2.X.values);
  REQUIRE(subsample(d, 5000, 13).size() == d.size());  // n >= size: unchanged
  REQUIRE_THROWS_AS(subsample(d, 0, 13), SpecError);

  const Dataset rows = take_rows(d, {5, 0, 5});
  REQUIRE(rows.size() == 3);
  REQUIRE(rows.X(0, 0) == d.X(5, 0));
  REQUIRE(rows.X(1, 0) == d.X(0, 0));
  REQUIRE(rows.X(2, 0) == d.X(5, 0));
  REQUIRE_THROWS_AS(take_rows(d, {99999}), IndexError);
}

TEST_CASE("dataset validation catches label overflow and NaN") {
  Dataset d = gen_synthetic(cluster_spec());
  d.y[0] = 7;
  REQUIRE_THROWS_AS(d.validate(), IndexError);
  d = gen_synthetic(cluster_spec());
  d.X(0, 0) = std::nan("");
  REQUIRE_THROWS_AS(d.validate(), NumericError);
}
