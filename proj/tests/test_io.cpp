#include <fracspde/config.hpp>
#include <fracspde/io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace fracspde;
using io::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  const auto dir = fs::temp_directory_path() / "fracspde_test_io";
  fs::create_directories(dir);
  return dir / name;
}

json minimal()
{
  return json::parse(R"({"index": {"alpha": [1.5], "delta": [0.3]},
                         "grid": {"n": 64, "L": 5.0},
                         "measure": {"kind": "riesz", "params": [0.5]},
                         "seed": 9})");
}

} // namespace

TEST(Io, DoubleRoundTrip)
{
  CounterRng rng(SeedPath{1, 0, 0, stream_purpose::test});
  for (int i = 0; i < 10000; ++i) {
    const double v = std::ldexp(rng.normal(), static_cast<int>(rng.uniform() * 200.0) - 100);
    ASSERT_EQ(io::parse_double(io::format_double(v)), v);
  }
  for (double v : {0.0, -0.0, 0.1, 1e-310, std::numeric_limits<double>::max(), std::numeric_limits<double>::min()})
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_THROW(io::parse_double("1.0x"), ConfigurationError);
  EXPECT_THROW(io::parse_double(""), ConfigurationError);
}

TEST(Io, CsvRoundTrip)
{
  const auto path = scratch("t.csv");
  const json meta{{"t", 0.25}, {"name", "x"}};
  const std::vector<std::vector<double>> rows{{1.0, 1.0 / 3.0}, {-2.5e-300, 7.0}};
  io::write_csv(path, meta, {"a", "b"}, rows);
  const auto t = io::read_csv(path);
  EXPECT_EQ(t.meta, meta);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.rows, rows);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.substr(0, 3), "# {");
  EXPECT_THROW(io::write_csv(path, meta, {"a"}, rows), ConsistencyError);
}

TEST(Io, BinaryRoundTripAndLayout)
{
  const auto path = scratch("t.fspd");
  const Grid g(2, 4, 1.0);
  std::vector<Field> frames{Field(g), Field(g)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    frames[0].values[i] = static_cast<double>(i);
    frames[1].values[i] = -1.0 / (1.0 + static_cast<double>(i));
  }
  io::write_frames(path, frames);
  const auto a = io::read_binary(path);
  EXPECT_EQ(a.shape, (std::vector<std::uint64_t>{2, 4, 4}));
  ASSERT_EQ(a.values.size(), 32u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(a.values[i], frames[0].values[i]);
    EXPECT_EQ(a.values[16 + i], frames[1].values[i]);
  }
  // header: magic, version, rank, 3 shape words, then the payload
  EXPECT_EQ(fs::file_size(path), 4u + 4 + 4 + 3 * 8 + 32 * 8);
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "FSPD");
  // value 1.0 of frame 0, cell 1, little endian
  in.seekg(4 + 4 + 4 + 24 + 8);
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  EXPECT_EQ(b[7], 0x3f);
  EXPECT_EQ(b[6], 0xf0);
  EXPECT_EQ(b[0], 0x00);

  EXPECT_THROW(io::write_binary(path, {3}, {1.0, 2.0}), ConsistencyError);
  std::ofstream(scratch("bad.fspd")) << "NOPE";
  EXPECT_THROW(io::read_binary(scratch("bad.fspd")), ConfigurationError);
}

TEST(Io, DigestIsFnv1a)
{
  const auto path = scratch("d.txt");
  std::ofstream(path, std::ios::binary) << "a";
  EXPECT_EQ(io::file_digest(path), "af63dc4c8601ec8c");
  std::ofstream(path, std::ios::binary | std::ios::trunc);
  EXPECT_EQ(io::file_digest(path), "cbf29ce484222325");
}

TEST(Config, ParsesAllBlocks)
{
  auto j = minimal();
  j["kernel"] = {{"times", {0.5, 1.0}}};
  j["admissibility"] = {{"etas", {0.5, 1.0}}, {"horizons", {2.0}}};
  j["solver"] = json::parse(R"({"dt": 0.001, "T": 0.1, "scheme": "picard",
                               "diffusion": {"preset": "constant", "params": [1.0]},
                               "u0": {"preset": "gaussian", "params": [1.0, 0.5]},
                               "replicates": 4, "save_every": 10})");
  j["holder"] = {{"replicates", 300}, {"x_probe", 3}};
  j["density"] = {{"replicates", 800}, {"bandwidth", 0.1}, {"theta1", 1.5}};
  const auto c = config::parse(j);
  EXPECT_EQ(c.idx, FractionalIndex({1.5}, {0.3}));
  EXPECT_EQ(c.grid, Grid(1, 64, 5.0));
  EXPECT_EQ(c.measure.kind(), MeasureKind::riesz);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.kernel->times.size(), 2u);
  EXPECT_EQ(c.admissibility->horizons, std::vector<double>{2.0});
  EXPECT_EQ(c.solver->scheme, Scheme::picard);
  EXPECT_EQ(c.holder->replicates, 300u);
  EXPECT_EQ(*c.holder->x_probe, 3u);
  EXPECT_EQ(c.density->bandwidth.rule, BandwidthRule::fixed);
  const auto sc = c.solver_config();
  EXPECT_EQ(sc.steps(), 100u);
  EXPECT_EQ(sc.master_seed, 9u);
}

TEST(Config, SeedOverrideIsRecorded)
{
  const auto c = config::parse(minimal(), 42);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.raw.at("seed"), 42);
}

TEST(Config, RejectsBadInput)
{
  auto with = [](const char* path, json v) {
    auto j = minimal();
    j[json::json_pointer(path)] = std::move(v);
    return j;
  };
  EXPECT_THROW(config::parse(with("/typo", 1)), ConfigurationError);
  EXPECT_THROW(config::parse(with("/grid/N", 1)), ConfigurationError);
  EXPECT_THROW(config::parse(with("/index/alpha", {2.5})), ConstraintViolation);
  EXPECT_THROW(config::parse(with("/grid/n", 7)), ConstraintViolation);
  EXPECT_THROW(config::parse(with("/grid/n", "many")), ConfigurationError);
  EXPECT_THROW(config::parse(with("/measure/kind", "pink")), ConfigurationError);
  EXPECT_THROW(config::parse(with("/measure/d", 2)), ConstraintViolation);
  EXPECT_THROW(config::parse(with("/admissibility", {{"etas", {1.5}}})), DomainError);
  EXPECT_THROW(config::parse(with("/holder", {{"replicates", 50}})), ConstraintViolation);
  EXPECT_THROW(config::parse(with("/density", {{"replicates", 100}})), ConstraintViolation);
  EXPECT_THROW(config::parse(with("/density", {{"theta2", 1.5}})), DomainError);
  auto j = minimal();
  j.erase("grid");
  EXPECT_THROW(config::parse(j), ConfigurationError);
  j = minimal();
  j["solver"] = {{"dt", 0.003}, {"T", 0.01}};
  EXPECT_THROW(config::parse(j), Error);
}

TEST(Config, ShippedConfigsParse)
{
  const fs::path dir = fs::path(FRACSPDE_SOURCE_DIR) / "configs";
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json")
      continue;
    EXPECT_NO_THROW(config::load(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 5u);
}
