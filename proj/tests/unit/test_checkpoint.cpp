// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "antlab/checkpoint.hpp"
#include "antlab/denoiser.hpp"
#include "antlab/io.hpp"

using namespace antlab;

namespace {
Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.manifest_json = R"({"note":"x"})";
  c.tensors.emplace("a", Tensor({2, 2}, {1.0, -0.0, std::numeric_limits<double>::denorm_min(), 1e300}));
  c.tensors.emplace("b.c", Tensor({3}, {0.1, 0.2, 0.3}));
  return c;
}
}  // namespace

TEST_CASE("checkpoint container round trip") {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  CHECK(bytes.substr(0, 8) == "ANTLABCK");
  // version 1, little-endian
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);

  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.manifest_json == c.manifest_json);
  REQUIRE(back.tensors.size() == 2);
  const Tensor& a = back.tensors.at("a");
  CHECK(a.shape() == Shape{2, 2});
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::bit_cast<std::uint64_t>(a[i]) == std::bit_cast<std::uint64_t>(c.tensors.at("a")[i]));
  CHECK(serialize_checkpoint(back) == bytes);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(magic), std::runtime_error);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(version), doctest::Contains("version 9"), std::runtime_error);
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() - 1})
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, cut)), std::runtime_error);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "z"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.ck"), std::runtime_error);
}

TEST_CASE("model parameters through a file") {
  const auto dir = std::filesystem::temp_directory_path() / "antlab_ckpt_test";
  std::filesystem::remove_all(dir);
  Model m = make_model(4);
  Checkpoint c;
  store_model(m, c);
  const std::string path = (dir / "m.ck").string();
  save_checkpoint(path, c);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

  Model fresh = make_model(5);
  restore_model(fresh, load_checkpoint(path));
  std::map<std::string, std::vector<double>> want;
  m.visit([&](const std::string& n, Tensor& t) { want[n] = t.values(); });
  fresh.visit([&](const std::string& n, Tensor& t) { CHECK(t.values() == want.at(n)); });

  Checkpoint missing = c;
  missing.tensors.erase("den.out_proj.w");
  CHECK_THROWS_WITH_AS(restore_model(fresh, missing), doctest::Contains("den.out_proj.w"), std::runtime_error);
  Checkpoint reshaped = c;
  reshaped.tensors.at("den.out_proj.b") = Tensor({3});
  CHECK_THROWS_AS(restore_model(fresh, reshaped), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("architecture hash") {
  Model a = make_model(1), b = make_model(2);
  CHECK(architecture_hash(a) == architecture_hash(b));  // weights do not enter
  ModelOptions o;
  o.conditioner.kind = ConditionerKind::kStatic;
  Model s = make_model(1, o);
  CHECK(architecture_hash(a) != architecture_hash(s));
  o = ModelOptions{};
  o.conditioner.sigma_mode = SigmaMode::kLearned;
  Model l = make_model(1, o);
  CHECK(architecture_hash(a) != architecture_hash(l));
  CHECK(hash_hex(0xABCull) == "0000000000000abc");
}

TEST_CASE("atomic writes and real formatting") {
  const auto dir = std::filesystem::temp_directory_path() / "antlab_io_test";
  std::filesystem::remove_all(dir);
  const std::string path = (dir / "nested" / "f.txt").string();
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  CHECK(read_file(path) == "two");
  std::filesystem::remove_all(dir);

  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0}) CHECK(std::stod(fmt_real(v)) == v);
  CHECK(fmt_real(0.5) == "0.5");
  CsvTable t({"a", "b"});
  CHECK_THROWS_AS(t.row({"1"}), std::invalid_argument);
  t.row({"1", "2"});
  CHECK(t.str() == "a,b\n1,2\n");
}
