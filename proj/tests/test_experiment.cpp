#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairspread/error.hpp"
#include "fairspread/experiment.hpp"

using namespace fairspread;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory under the system temp dir, removed on destruction.
struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fairspread_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path / name, std::ios::binary) << content;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig small_sbm(std::size_t n, std::size_t R) {
  ExperimentConfig c;
  c.name = "small";
  SyntheticSource src;
  src.n = n;
  src.pi = {0.6, 0.4};
  src.P.resize(2, 2);
  src.P << 0.2, 0.05, 0.05, 0.3;
  src.labels = LabelMode::kFixed;
  c.source = src;
  c.transmission.scalar = {0.3};
  c.budget.M = 6;
  c.replications = R;
  c.strategies = {Strategy::kEqual, Strategy::kProposed};
  return c;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("edge list collapses duplicates and drops self-loops") {
    ScratchDir dir("dedup");
    const auto path = dir.write("e.txt", "# comment\n1,2\n2 1\n\n1\t1\n");
    const LoadedNetwork net = read_edge_list(path);
    CHECK(net.network.num_nodes() == 2);
    CHECK(net.network.num_edges() == 1);
    CHECK(net.node_ids == std::vector<std::string>{"1", "2"});
  }

  TEST_CASE("edge list ids sort numerically or lexicographically") {
    ScratchDir dir("ids");
    const LoadedNetwork numeric = read_edge_list(dir.write("a.txt", "10 9\n9 100\n"));
    CHECK(numeric.node_ids == std::vector<std::string>{"9", "10", "100"});
    const LoadedNetwork text = read_edge_list(dir.write("b.txt", "b a\nc b\n"));
    CHECK(text.node_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(text.network.has_edge(0, 1));
  }

  TEST_CASE("malformed lines are reported with their line number") {
    ScratchDir dir("bad");
    const auto path = dir.write("e.txt", "1 2\n2 3 4\n");
    const std::string msg = error_message([&] { read_edge_list(path); });
    CHECK(msg.find(":2") != std::string::npos);
  }

  TEST_CASE("label files") {
    ScratchDir dir("labels");
    const auto edges = dir.write("e.txt", "1 2\n2 3\n");
    const LoadedNetwork ok = read_edge_list(edges, dir.write("l.txt", "node,label\n1,x\n2,y\n3,x\n"));
    REQUIRE(ok.truth.has_value());
    CHECK(ok.truth->num_communities() == 2);
    CHECK((*ok.truth)[0] == (*ok.truth)[2]);
    CHECK((*ok.truth)[0] != (*ok.truth)[1]);
    CHECK_THROWS_AS(read_edge_list(edges, dir.write("u.txt", "1,x\n2,y\n3,x\n7,y\n")), Error);
    CHECK_THROWS_AS(read_edge_list(edges, dir.write("m.txt", "1,x\n2,y\n")), Error);
  }

  TEST_CASE("largest component") {
    const Network net(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {5, 6}, {6, 7}});
    std::vector<std::size_t> kept;
    const Network lcc = extract_lcc(net, &kept);
    CHECK(lcc.num_nodes() == 5);
    CHECK(kept == std::vector<std::size_t>{0, 1, 2, 3, 4});
    const Network tie(6, {{3, 4}, {4, 5}, {0, 1}, {1, 2}});
    extract_lcc(tie, &kept);
    CHECK(kept == std::vector<std::size_t>{0, 1, 2});
    const Network whole(3, {{0, 1}, {1, 2}});
    CHECK(extract_lcc(whole).num_edges() == 2);
  }

  TEST_CASE("largest label groups") {
    ScratchDir dir("groups");
    const auto edges = dir.write("e.txt", "1 2\n2 3\n3 4\n4 5\n5 6\n");
    const LoadedNetwork net = read_edge_list(edges, dir.write("l.txt", "1,a\n2,a\n3,b\n4,b\n5,b\n6,c\n"));
    const LoadedNetwork top = keep_largest_label_groups(net, 2);
    CHECK(top.network.num_nodes() == 5);
    CHECK(top.node_ids.back() == "5");
  }

  TEST_CASE("seed budgets") {
    CHECK(seed_budget(1222, BudgetRule::parse("floor-sqrt-n")) == 34);
    CHECK(seed_budget(350, BudgetRule::parse("sqrt")) == 18);
    CHECK(seed_budget(1000, BudgetRule::parse("30")) == 30);
    CHECK(seed_budget(1024, BudgetRule::parse("sqrt")) == 32);
    CHECK_THROWS_AS(seed_budget(20, BudgetRule::parse("30")), Error);
    CHECK_THROWS_AS(BudgetRule::parse("lots"), Error);
  }

  TEST_CASE("every built-in recipe round-trips through json") {
    for (const auto& name : builtin_recipe_names()) {
      const ExperimentConfig c = builtin_recipe(name);
      CHECK_NOTHROW(c.check());
      const nlohmann::json j = to_json(c);
      CHECK(to_json(parse_config(j)) == j);
    }
    CHECK_THROWS_AS(builtin_recipe("nope"), Error);
  }

  TEST_CASE("config parsing") {
    const nlohmann::json j = nlohmann::json::parse(R"json({
      "name": "demo",
      "source": {"type": "synthetic", "n": 200, "pi": [0.5, 0.5], "P": [[0.1, 0.02], [0.02, 0.1]],
                 "theta": "poisson(5)", "labels": "fixed"},
      "transmission": {"within": [0.1, 0.5], "between": [0.2]},
      "t": [1, 2], "lambda": 2, "budget": 10, "strategies": ["proposed", "equal"],
      "replications": 3, "seed": 7
    })json");
    const ExperimentConfig c = parse_config(j);
    CHECK(c.name == "demo");
    CHECK(c.transmission.points().size() == 2);
    CHECK(c.t == std::vector<int>{1, 2});
    CHECK(c.lambda == std::vector<double>{2.0});
    CHECK(c.budget.M == 10);
    CHECK(c.replications == 3);
    const auto& src = std::get<SyntheticSource>(c.source);
    CHECK(src.labels == LabelMode::kFixed);
    CHECK(src.theta.kind == ThetaSource::Kind::kPoissonPlusOne);

    nlohmann::json bad = j;
    bad["replicatons"] = 3;
    CHECK_THROWS_AS(parse_config(bad), Error);
    bad = j;
    bad["replications"] = 0;
    CHECK_THROWS_AS(parse_config(bad).check(), Error);
    bad = j;
    bad["source"]["type"] = "csv";
    CHECK_THROWS_AS(parse_config(bad), Error);
  }

  TEST_CASE("config files resolve relative data paths") {
    ScratchDir dir("cfg");
    fs::create_directories(dir.path / "sub");
    dir.write("sub/c.json", R"({"source": {"type": "edge_list", "edges": "e.txt", "K": 2}})");
    const ExperimentConfig c = load_config(dir.path / "sub" / "c.json");
    CHECK(fs::path(std::get<EdgeListSource>(c.source).edges) == dir.path / "sub" / "e.txt");
  }

  TEST_CASE("empty result tables have only a header") {
    std::ostringstream a;
    write_results_csv(a, {}, 2);
    CHECK(a.str() ==
          "experiment,sweep,replication,strategy,lambda,beta_within,beta_between,t,seeds_1,seeds_2,q_1,q_2,H,m,"
          "H_with_seeds,m_with_seeds,pred_m,pred_q_1,pred_q_2,pred_H\n");
    std::ostringstream b;
    write_summary_csv(b, {}, 2);
    const std::string summary = b.str();
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 1);
  }

  TEST_CASE("sbm1 recipe yields one row per replication and strategy") {
    const ExperimentResult r = run_experiment(builtin_recipe("sbm1"));
    CHECK(r.rows.size() == 200);
    CHECK(r.summary.size() == 4);
    CHECK(r.plans[0].community_counts == std::vector<std::size_t>{4, 8, 18});
    for (const auto& row : r.rows) {
      std::size_t total = 0;
      for (std::size_t s : row.seeds) total += s;
      CHECK(total == 30);
    }
  }

  TEST_CASE("predicted columns are fixed per configuration") {
    ExperimentConfig c = small_sbm(120, 6);
    c.lambda = {0.5, 3.0};
    const ExperimentResult r = run_experiment(c);
    CHECK(r.rows.size() == 2 * 6 * 2);
    for (const auto& row : r.rows) {
      const std::size_t g = row.strategy == Strategy::kEqual ? 0 : 1;
      const PlannedAllocation& plan = r.plans[row.sweep * 2 + g];
      CHECK(row.pred_m == plan.predicted.m);
      CHECK(row.pred_H == plan.predicted.H);
      for (std::size_t k = 0; k < 2; ++k) CHECK(row.pred_q[k] == plan.predicted.q[static_cast<Eigen::Index>(k)]);
      CHECK(row.lambda == r.sweeps[row.sweep].lambda);
    }
  }

  TEST_CASE("summary statistics") {
    std::vector<ResultRow> rows(3);
    const double H[3] = {0.5, 0.7, 0.9};
    for (std::size_t r = 0; r < 3; ++r) {
      rows[r].experiment = "x";
      rows[r].replication = r;
      rows[r].seeds = {1, 2};
      rows[r].q = {0.1 * static_cast<double>(r), 0.2};
      rows[r].pred_q = {0.0, 0.0};
      rows[r].H = H[r];
    }
    const auto s = summarize(rows, 2);
    REQUIRE(s.size() == 1);
    CHECK(s[0].replications == 3);
    CHECK(s[0].mean_H == doctest::Approx(0.7));
    CHECK(s[0].sd_H == doctest::Approx(0.2));
    CHECK(s[0].mean_q[0] == doctest::Approx(0.1));
    CHECK(s[0].mean_seeds == std::vector<double>{1.0, 2.0});
  }

  TEST_CASE("identical seeds give byte-identical output") {
    ScratchDir dir("determinism");
    for (const char* name : {"sbm1", "dcsbm-time"}) {
      ExperimentConfig c = builtin_recipe(name);
      c.replications = 5;
      write_results(run_experiment(c), dir.path / "a");
      write_results(run_experiment(c), dir.path / "b");
      CHECK(slurp(dir.path / "a" / "results.csv") == slurp(dir.path / "b" / "results.csv"));
      CHECK(slurp(dir.path / "a" / "summary.csv") == slurp(dir.path / "b" / "summary.csv"));
      c.seed += 1;
      write_results(run_experiment(c), dir.path / "b");
      CHECK(slurp(dir.path / "a" / "results.csv") != slurp(dir.path / "b" / "results.csv"));
    }
  }

  TEST_CASE("replicated one-step coverage converges to the closed form") {
    // Fixed labels, plain SBM, t = 1: a non-seed node in community k is reached
    // with probability 1 - prod_l (1 - beta P_kl)^{y_l}, independent of where
    // the seeds sit within their communities.
    ExperimentConfig c = small_sbm(50, 1000);
    c.strategies = {Strategy::kEqual};
    const ExperimentResult r = run_experiment(c);
    const auto& src = std::get<SyntheticSource>(c.source);
    const std::vector<double> n_k{30, 20};
    const std::vector<double> y{3, 3};
    for (std::size_t k = 0; k < 2; ++k) {
      double miss = 1.0;
      for (std::size_t l = 0; l < 2; ++l) {
        miss *= std::pow(1.0 - 0.3 * src.P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)), y[l]);
      }
      const double expected = (n_k[k] - y[k]) / n_k[k] * (1.0 - miss);
      double mean = 0.0;
      double sq = 0.0;
      for (const auto& row : r.rows) {
        mean += row.q[k];
        sq += row.q[k] * row.q[k];
      }
      mean /= 1000.0;
      const double se = std::sqrt((sq / 1000.0 - mean * mean) / 1000.0);
      CHECK(std::abs(mean - expected) < 4 * se);
    }
  }

  TEST_CASE("observed synthetic network reports detection diagnostics") {
    ExperimentConfig c = builtin_recipe("polblogs-synthetic");
    c.replications = 2;
    c.transmission.within = {0.1, 0.5};
    c.transmission.between = {0.1};
    const ExperimentResult r = run_experiment(c);
    CHECK(r.K == 2);
    CHECK(r.budget == static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(r.n)))));
    CHECK(r.echo["resolved"].contains("label_accuracy"));
    CHECK(r.rows.size() == 2 * 2);
  }
}
