#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "semimix/io.hpp"
#include "semimix/simulation.hpp"

using namespace semimix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "semimix_io_test";
  fs::create_directories(dir);
  return dir / name;
}

fs::path fixture(const std::string& name) { return fs::path(SEMIMIX_FIXTURES) / name; }

}  // namespace

TEST_CASE("datasets survive a write and read") {
  MixedDesign md;
  md.n = 200;
  md.seed = 4;
  const Dataset data = generate(md);
  const fs::path csv = scratch("mixed.csv");
  io::write_dataset(data, csv);
  const Dataset back = io::read_dataset(csv);
  CHECK(back.y == data.y);
  CHECK(back.u == data.u);
  CHECK(back.u_names == std::vector<std::string>{"u1", "u2"});
  REQUIRE(back.x.size() == data.x.size());
  for (std::size_t j = 0; j < data.x.size(); ++j) {
    CHECK(back.x[j].name == data.x[j].name);
    CHECK(back.x[j].values == data.x[j].values);
    CHECK(back.x[j].levels == data.x[j].levels);
    CHECK(back.x[j].cardinality == data.x[j].cardinality);
  }
  CHECK(*back.true_z == *data.true_z);

  SimDesign d;
  d.n = 500;
  io::write_dataset(generate(d), scratch("case1.csv"));
  std::ifstream in(scratch("case1.csv"));
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 501);
}

TEST_CASE("ingestion drops incomplete rows and maps levels") {
  std::size_t dropped = 0;
  const Dataset data = io::read_dataset(fixture("labelled.csv"), fixture("labelled.schema.json"), &dropped);
  CHECK(dropped == 2);
  CHECK(data.n() == 4);
  CHECK(data.x[1].levels == std::vector<int>{0, 1, 0, 1});
  CHECK(*data.true_z == std::vector<int>{0, 1, 0, 1});
  CHECK(data.y(3) == doctest::Approx(1.8));
}

TEST_CASE("sidecar problems are schema errors") {
  const fs::path csv = fixture("labelled.csv");
  for (const char* bad : {"invalid/future_major.schema.json", "invalid/bad_role.schema.json",
                          "invalid/categorical_without_levels.schema.json"}) {
    try {
      io::read_dataset(csv, fixture(bad));
      FAIL("expected a schema error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Schema);
    }
  }
  try {
    io::read_dataset(scratch("absent.csv"), fixture("labelled.schema.json"));
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("standardisation inverts on quadratic coefficients") {
  SimDesign d;
  d.n = 300;
  d.seed = 9;
  Dataset data = generate(d);
  for (Eigen::Index i = 0; i < data.u.rows(); ++i) data.u(i, 1) = 3.0 * data.u(i, 1) + 7.0;
  data.y = 2.5 * data.y.array() - 4.0;
  const Responsibilities t = hard_responsibilities(*data.true_z, 2);
  const LossFit raw = weighted_loss_fit(data.u, data.y, t, LossSpec::quadratic());

  const io::Standardization st = io::Standardization::fit(data);
  Dataset scaled = data;
  st.apply(scaled);
  CHECK(std::abs(scaled.y.mean()) < 1e-12);
  const LossFit fit = weighted_loss_fit(scaled.u, scaled.y, t, LossSpec::quadratic());
  const RegressionCoefficients back = st.to_original(fit.coeffs);
  CHECK((back.stacked() - raw.coeffs.stacked()).cwiseAbs().maxCoeff() < 1e-9);

  const io::Standardization again = io::Standardization::from_json(st.to_json());
  CHECK(again.y.sd == st.y.sd);
  CHECK(again.x.size() == 4);
}
