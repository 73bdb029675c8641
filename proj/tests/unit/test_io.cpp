#include <sstream>

#include <gtest/gtest.h>

#include "itpi/io.hpp"
#include "support.hpp"

using namespace itpi;

namespace {
bool same_path(const PiecewisePath& a, const PiecewisePath& b) {
  if (a.vertices().size() != b.vertices().size() || a.dim() != b.dim() || a.time_reversed() != b.time_reversed()) return false;
  for (std::size_t i = 0; i < a.vertices().size(); ++i) {
    const auto& p = a.vertices()[i];
    const auto& q = b.vertices()[i];
    if (p.t != q.t) return false;
    for (int d = 0; d < p.dim; ++d)
      if (p.x[d] != q.x[d]) return false;
  }
  return true;
}
}  // namespace

TEST(PathIo, CsvAndJsonRoundTripBitExactProperty) {
  test::for_all(100, 81, [](std::mt19937_64& rng, int) {
    const auto path = oracle::random_path(rng, test::any_class(rng), test::any_dim(rng), 1 + static_cast<int>(rng() % 20));
    std::stringstream ss;
    io::write_path_csv(ss, path);
    EXPECT_TRUE(same_path(io::read_path_csv(ss), path));
    const auto back = io::path_from_json(nlohmann::json::parse(io::path_to_json(path).dump()));
    EXPECT_TRUE(same_path(back, path));
  });
}

TEST(PathIo, ReversedPathKeepsItsTag) {
  const auto rev = reverse_path(test::rest_path({0, 1, 2.5}));
  std::stringstream ss;
  io::write_path_csv(ss, rev);
  const auto back = io::read_path_csv(ss);
  EXPECT_TRUE(back.time_reversed());
  EXPECT_TRUE(same_path(back, rev));
}

TEST(PathIo, RejectsMalformedInput) {
  std::stringstream bad_header("time,x\n0,0\n1,0\n");
  EXPECT_THROW(io::read_path_csv(bad_header), Error);
  std::stringstream bad_number("t,x\n0,0\n1,abc\n");
  EXPECT_THROW(io::read_path_csv(bad_number), Error);
  std::stringstream ragged("t,x,y\n0,0\n");
  EXPECT_THROW(io::read_path_csv(ragged), Error);
  std::stringstream empty("");
  EXPECT_THROW(io::read_path_csv(empty), Error);
  EXPECT_THROW(io::path_from_json(nlohmann::json{{"dim", 4}, {"vertices", nlohmann::json::array()}}), Error);
}

TEST(EnsembleIo, RoundTrip) {
  const auto ens = PathEnsemble::from_internal_times({0.1, -0.30000000000000004, 1e-300}, {1.0, 0.5, 2.0});
  std::stringstream ss;
  io::write_ensemble_csv(ss, ens);
  const auto back = io::read_ensemble_csv(ss);
  EXPECT_EQ(back.internal_times(), ens.internal_times());
  EXPECT_EQ(back.weights(), ens.weights());
  std::stringstream bad("id,tau,weight\n0,1,1\n");
  EXPECT_THROW(io::read_ensemble_csv(bad), Error);
}

TEST(FieldIo, HeadersFollowEstimatorKind) {
  AmplitudeField f;
  f.values = {{1.0, 0.0}, {0.0, 0.5}};
  f.x = {-1.0, 1.0};
  std::stringstream exact;
  io::write_field_csv(exact, f);
  EXPECT_EQ(exact.str(), "site_index,x,re,im,prob\n0,-1,1,0,1\n1,1,0,0.5,0.25\n");
  f.standard_error = {0.1, 0.2};
  std::stringstream mc;
  io::write_field_csv(mc, f);
  EXPECT_EQ(mc.str().substr(0, mc.str().find('\n')), "site_index,x,re,im,prob,stderr");
  EXPECT_EQ(io::field_to_json(f)["sites"][1]["stderr"].get<double>(), 0.2);
}

TEST(SweepIo, HeaderAndErrorRows) {
  std::vector<SweepRow> rows(1);
  rows[0].Q = 1;
  rows[0].D = 2;
  rows[0].u = 0.5;
  rows[0].error = "bad cell";
  std::stringstream ss;
  io::write_sweep_csv(ss, rows);
  EXPECT_EQ(ss.str(),
            "Q,D,u,delta_alpha,delta_alpha_num,delta_alpha_C,delta_alpha_C_num,difference,first_order_difference,flags\n"
            "1,2,0.5,,,,,,,\"error: bad cell\"\n");
  EXPECT_EQ(io::sweep_to_json(rows)[0]["error"], "bad cell");
}

TEST(AtomicWrite, ReplacesTargetWithoutLeavingTemporary) {
  const auto dir = std::filesystem::temp_directory_path() / "itpi_io_test";
  std::filesystem::create_directories(dir);
  const auto target = dir / "out.txt";
  io::atomic_write(target, "first");
  io::atomic_write(target, "second");
  std::ifstream is(target);
  std::string s((std::istreambuf_iterator<char>(is)), {});
  EXPECT_EQ(s, "second");
  EXPECT_FALSE(std::filesystem::exists(dir / "out.txt.tmp"));
  std::filesystem::remove_all(dir);
}
