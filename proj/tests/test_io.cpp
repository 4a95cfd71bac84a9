// Persistence layer: dataset blobs, checkpoints, strict configs, metrics CSVs
// and the raster canvas.  Round-trips must be bit-exact and every corruption
// mode must be rejected with a precise error.  Seeds 600-629.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "afa/core/errors.hpp"
#include "afa/core/rng.hpp"
#include "afa/core/types.hpp"
#include "afa/io/bmp.hpp"
#include "afa/io/checkpoint.hpp"
#include "afa/io/config.hpp"
#include "afa/io/dataset.hpp"
#include "afa/io/metrics.hpp"

using namespace afa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("afa_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    REQUIRE(bool(f));
    std::vector<char> bytes(static_cast<size_t>(f.tellg()));
    f.seekg(0);
    f.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return bytes;
}

void spit(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    REQUIRE(bool(f));
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string slurp_text(const std::string& path) {
    const std::vector<char> b = slurp(path);
    return std::string(b.begin(), b.end());
}

EnvDescriptor toy_descriptor() {
    EnvDescriptor desc;
    desc.name = "toy";
    desc.n_features = 3;
    desc.obs_shape = {5};
    desc.n_control_actions = 4;
    desc.max_steps = 12;
    desc.feature_group_map = {{0}, {1, 2}, {4}};  // raw index 3 always visible
    desc.validate();
    return desc;
}

TrajectoryRecord random_record(Rng& rng, const EnvDescriptor& desc, const CostModel& cm,
                               bool supervised) {
    TrajectoryRecord r;
    r.length = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(desc.max_steps)));
    const int dim = desc.obs_dim();
    r.observations.resize(r.length, dim);
    for (int t = 0; t < r.length; ++t)
        for (int d = 0; d < dim; ++d) r.observations(t, d) = static_cast<float>(rng.normal());
    r.masks.assign(static_cast<size_t>(r.length) * dim, 0);
    r.controls.resize(r.length);
    r.acquisitions.assign(static_cast<size_t>(r.length) * desc.n_features, 0);
    r.rewards.resize(r.length);
    r.costs.resize(r.length);
    for (int t = 0; t < r.length; ++t) {
        FeatureMask fm;
        fm.bits.resize(desc.n_features);
        for (int f = 0; f < desc.n_features; ++f) {
            fm.bits[f] = rng.bernoulli(0.5) ? 1 : 0;
            r.acquisitions[static_cast<size_t>(t) * desc.n_features + f] = fm.bits[f];
        }
        const std::vector<uint8_t> raw = expand_mask(fm, desc);
        std::copy(raw.begin(), raw.end(), r.masks.begin() + static_cast<size_t>(t) * dim);
        r.controls[t] = static_cast<int>(rng.uniform_int(desc.n_control_actions));
        r.rewards[t] = static_cast<float>(rng.uniform(-1.0, 1.0));
        r.costs[t] = static_cast<float>(acquisition_cost(fm, cm));
    }
    r.terminal_flag = rng.bernoulli(0.5);
    if (supervised) {
        r.supervision.resize(dim);
        for (int d = 0; d < dim; ++d) r.supervision[d] = rng.bernoulli(0.7) ? 1 : 0;
    }
    return r;
}

io::Dataset make_toy_dataset(uint64_t seed, int n) {
    io::Dataset ds;
    ds.desc = toy_descriptor();
    ds.cost.unit_cost = 0.01;
    ds.cost.discount = 0.95;
    ds.meta.env_version = "toy-v1";
    ds.meta.generator = "unit-test";
    ds.meta.config_hash = "0123456789abcdef";
    ds.meta.seed = seed;
    Rng rng(seed);
    for (int i = 0; i < n; ++i)
        ds.records.push_back(random_record(rng, ds.desc, ds.cost, i % 2 == 0));
    return ds;
}

void check_records_equal(const TrajectoryRecord& a, const TrajectoryRecord& b) {
    REQUIRE(a.length == b.length);
    REQUIRE(a.observations.rows() == b.observations.rows());
    REQUIRE(a.observations.cols() == b.observations.cols());
    // float payloads must survive the blob bit-exactly
    CHECK(std::memcmp(a.observations.data(), b.observations.data(),
                      sizeof(float) * a.observations.size()) == 0);
    CHECK(a.masks == b.masks);
    CHECK(a.controls == b.controls);
    CHECK(a.acquisitions == b.acquisitions);
    CHECK(a.rewards == b.rewards);
    CHECK(a.costs == b.costs);
    CHECK(a.terminal_flag == b.terminal_flag);
    CHECK(a.supervision == b.supervision);
}

nn::ParameterSet make_params(uint64_t seed) {
    nn::ParameterSet params;
    Rng rng(seed);
    auto fill = [&](const std::string& name, int rows, int cols) {
        nn::Mat m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
        params.add(name, m);
    };
    fill("enc.W", 3, 5);
    fill("enc.b", 1, 5);
    fill("head.W", 7, 1);
    return params;
}

}  // namespace

TEST_CASE("fnv1a64 matches published test vectors") {
    CHECK(io::fnv1a64("", 0) == 0xcbf29ce484222325ULL);
    CHECK(io::fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
    CHECK(io::fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
    CHECK(io::fnv_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
    CHECK(io::fnv_hex(0x1ULL) == "0000000000000001");
}

TEST_CASE("format_double is shortest round-trip form") {
    CHECK(io::format_double(0.0) == "0");
    CHECK(io::format_double(2.0) == "2");
    CHECK(io::format_double(0.5) == "0.5");
    CHECK(io::format_double(-0.25) == "-0.25");
    Rng rng(600);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-8.0, 8.0));
        CHECK(std::stod(io::format_double(v)) == v);
    }
}

TEST_CASE("dataset round-trips 100 trajectories bit-exactly") {
    TempDir dir("dataset_roundtrip");
    const io::Dataset ds = make_toy_dataset(601, 100);
    io::write_dataset(dir.str(), ds.desc, ds.cost, ds.records, ds.meta);

    const io::Dataset back = io::read_dataset(dir.str());
    CHECK(back.desc.name == ds.desc.name);
    CHECK(back.desc.n_features == ds.desc.n_features);
    CHECK(back.desc.obs_shape == ds.desc.obs_shape);
    CHECK(back.desc.n_control_actions == ds.desc.n_control_actions);
    CHECK(back.desc.max_steps == ds.desc.max_steps);
    CHECK(back.desc.feature_group_map == ds.desc.feature_group_map);
    CHECK(back.cost.unit_cost == ds.cost.unit_cost);
    CHECK(back.cost.discount == ds.cost.discount);
    CHECK(back.meta.env_version == "toy-v1");
    CHECK(back.meta.generator == "unit-test");
    CHECK(back.meta.config_hash == "0123456789abcdef");
    CHECK(back.meta.seed == 601);
    REQUIRE(back.records.size() == ds.records.size());
    for (size_t i = 0; i < ds.records.size(); ++i)
        check_records_equal(ds.records[i], back.records[i]);
}

TEST_CASE("identical dataset writes produce byte-identical files") {
    TempDir a("dataset_det_a"), b("dataset_det_b");
    const io::Dataset ds = make_toy_dataset(602, 20);
    io::write_dataset(a.str(), ds.desc, ds.cost, ds.records, ds.meta);
    io::write_dataset(b.str(), ds.desc, ds.cost, ds.records, ds.meta);
    CHECK(slurp(a.sub("data.bin")) == slurp(b.sub("data.bin")));
    CHECK(slurp(a.sub("manifest.json")) == slurp(b.sub("manifest.json")));
}

TEST_CASE("dataset write rejects invalid records naming the trajectory") {
    TempDir dir("dataset_badwrite");
    io::Dataset ds = make_toy_dataset(603, 5);
    ds.records[2].costs[0] += 0.5f;  // cost no longer matches acquisitions
    try {
        io::write_dataset(dir.str(), ds.desc, ds.cost, ds.records, ds.meta);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("trajectory 2") != std::string::npos);
    }
}

TEST_CASE("truncated dataset blob is rejected") {
    TempDir dir("dataset_truncated");
    const io::Dataset ds = make_toy_dataset(604, 10);
    io::write_dataset(dir.str(), ds.desc, ds.cost, ds.records, ds.meta);
    std::vector<char> blob = slurp(dir.sub("data.bin"));
    blob.resize(blob.size() - 5);
    spit(dir.sub("data.bin"), blob);
    try {
        io::read_dataset(dir.str());
        FAIL("expected IntegrityError");
    } catch (const IntegrityError& e) {
        CHECK(std::string(e.what()).find("manifest expects") != std::string::npos);
    }
}

TEST_CASE("dataset blob corruption fails the checksum with both hashes") {
    TempDir dir("dataset_corrupt");
    const io::Dataset ds = make_toy_dataset(605, 10);
    io::write_dataset(dir.str(), ds.desc, ds.cost, ds.records, ds.meta);
    std::vector<char> blob = slurp(dir.sub("data.bin"));
    blob[blob.size() / 2] ^= 0x40;
    spit(dir.sub("data.bin"), blob);
    try {
        io::read_dataset(dir.str());
        FAIL("expected IntegrityError");
    } catch (const IntegrityError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("checksum mismatch") != std::string::npos);
        CHECK(msg.find("manifest ") != std::string::npos);
        CHECK(msg.find("actual ") != std::string::npos);
    }
}

TEST_CASE("manifest edits that break the offset chain are caught") {
    const io::Dataset ds = make_toy_dataset(606, 10);

    auto edited = [&](auto&& mutate) {
        static int counter = 0;
        TempDir dir("dataset_manifest_" + std::to_string(counter++));
        io::write_dataset(dir.str(), ds.desc, ds.cost, ds.records, ds.meta);
        json manifest = json::parse(slurp_text(dir.sub("manifest.json")));
        mutate(manifest);
        std::ofstream f(dir.sub("manifest.json"), std::ios::trunc);
        f << manifest.dump(1);
        f.close();
        try {
            io::read_dataset(dir.str());
            return std::string("no error");
        } catch (const IntegrityError& e) {
            return std::string(e.what());
        }
    };

    // Shifting an offset breaks the chain at that exact trajectory.
    CHECK(edited([](json& m) { m["trajectories"][7]["offset"] = 12345; })
              .find("inconsistent at trajectory 7") != std::string::npos);
    // Growing a length misaligns every later array read; the bad record (or
    // the broken chain behind it) is reported by trajectory index.
    CHECK(edited([](json& m) {
              m["trajectories"][3]["length"] =
                  m["trajectories"][3]["length"].get<int>() + 1;
          }).find("trajectory") != std::string::npos);
    // Dropping the last table entry leaves unexplained trailing bytes.
    CHECK(edited([](json& m) {
              m["trajectories"].erase(m["trajectories"].size() - 1);
              m["n_trajectories"] = m["trajectories"].size();
          }).find("trailing bytes") != std::string::npos);
    // Flipping a supervision flag changes the record footprint.
    CHECK(edited([](json& m) {
              auto& t0 = m["trajectories"][0];
              t0["supervised"] = !t0["supervised"].get<bool>();
          }).find("inconsistent at trajectory 1") != std::string::npos);
}

TEST_CASE("checkpoint round-trips values and meta") {
    TempDir dir("chkp_roundtrip");
    const nn::ParameterSet original = make_params(607);
    const json meta{{"model_kind", "unit"}, {"config_hash", "feedfacefeedface"}};
    io::save_checkpoint(dir.sub("m.chkp"), original, meta);

    nn::ParameterSet loaded = make_params(608);  // same layout, different values
    const json back = io::load_checkpoint(dir.sub("m.chkp"), loaded);
    CHECK(back == meta);
    for (const auto& p : original.all()) {
        const nn::Parameter* q = loaded.find(p->name);
        REQUIRE(q != nullptr);
        for (Eigen::Index i = 0; i < p->value.rows(); ++i)
            for (Eigen::Index j = 0; j < p->value.cols(); ++j)
                CHECK(q->value(i, j) == static_cast<double>(static_cast<float>(p->value(i, j))));
    }

    // Values are float-quantized on save, so save(load(x)) is byte-identical.
    io::save_checkpoint(dir.sub("m2.chkp"), loaded, meta);
    CHECK(slurp(dir.sub("m.chkp")) == slurp(dir.sub("m2.chkp")));

    CHECK(io::read_checkpoint_meta(dir.sub("m.chkp")) == meta);
}

TEST_CASE("corrupted or mismatched checkpoints are rejected") {
    TempDir dir("chkp_corrupt");
    const nn::ParameterSet original = make_params(609);
    const std::string path = dir.sub("m.chkp");
    io::save_checkpoint(path, original, json{{"v", 1}});

    SUBCASE("flipped data byte fails the checksum with both hashes") {
        std::vector<char> bytes = slurp(path);
        bytes.back() ^= 0x01;
        spit(path, bytes);
        nn::ParameterSet target = make_params(610);
        try {
            io::load_checkpoint(path, target);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("checksum mismatch") != std::string::npos);
            CHECK(msg.find("header ") != std::string::npos);
            CHECK(msg.find("actual ") != std::string::npos);
        }
    }
    SUBCASE("truncated file is rejected") {
        std::vector<char> bytes = slurp(path);
        bytes.resize(bytes.size() - 9);
        spit(path, bytes);
        nn::ParameterSet target = make_params(610);
        CHECK_THROWS_AS(io::load_checkpoint(path, target), IntegrityError);
    }
    SUBCASE("bad magic is rejected") {
        std::vector<char> bytes = slurp(path);
        bytes[0] = 'X';
        spit(path, bytes);
        nn::ParameterSet target = make_params(610);
        try {
            io::load_checkpoint(path, target);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
        }
    }
    SUBCASE("shape mismatch names the tensor and both shapes") {
        nn::ParameterSet target;
        target.add("enc.W", nn::Mat::Zero(5, 3));  // transposed layout
        target.add("enc.b", nn::Mat::Zero(1, 5));
        target.add("head.W", nn::Mat::Zero(7, 1));
        try {
            io::load_checkpoint(path, target);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("enc.W") != std::string::npos);
            CHECK(msg.find("3x5") != std::string::npos);
            CHECK(msg.find("5x3") != std::string::npos);
        }
    }
    SUBCASE("renamed tensor is rejected") {
        nn::ParameterSet target;
        target.add("enc.W", nn::Mat::Zero(3, 5));
        target.add("enc.bias", nn::Mat::Zero(1, 5));
        target.add("head.W", nn::Mat::Zero(7, 1));
        try {
            io::load_checkpoint(path, target);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("enc.b") != std::string::npos);
        }
    }
    SUBCASE("tensor count mismatch is rejected") {
        nn::ParameterSet target = make_params(610);
        target.add("extra", nn::Mat::Zero(2, 2));
        CHECK_THROWS_AS(io::load_checkpoint(path, target), IntegrityError);
    }
}

TEST_CASE("config defaults validate and survive a json round-trip") {
    const io::ExperimentConfig cfg;
    cfg.validate();
    const io::ExperimentConfig back = io::ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(back.config_hash() == cfg.config_hash());
    CHECK(cfg.config_hash().size() == 16);
}

TEST_CASE("config hash ignores output_dir but tracks everything else") {
    io::ExperimentConfig a, b;
    b.output_dir = "somewhere/else";
    CHECK(a.config_hash() == b.config_hash());
    b.master_seed = 99;
    CHECK(a.config_hash() != b.config_hash());
    io::ExperimentConfig c;
    c.rl.entropy_coef = 0.02;
    CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("config parsing is strict about keys and types") {
    const io::ExperimentConfig cfg;

    SUBCASE("misspelled key is rejected with its dotted path") {
        json j = cfg.to_json();
        j["vae"].erase("learning_rate");
        j["vae"]["leraning_rate"] = 0.001;
        try {
            io::ExperimentConfig::from_json(j);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("vae.leraning_rate") != std::string::npos);
        }
    }
    SUBCASE("unknown top-level key is rejected") {
        json j = cfg.to_json();
        j["extra_section"] = json::object();
        CHECK_THROWS_AS(io::ExperimentConfig::from_json(j), ValidationError);
    }
    SUBCASE("wrong type is rejected with the dotted path") {
        json j = cfg.to_json();
        j["env"]["unit_cost"] = "free";
        try {
            io::ExperimentConfig::from_json(j);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("env.unit_cost") != std::string::npos);
        }
    }
    SUBCASE("semantic validation failures are explained") {
        json j = cfg.to_json();
        j["env"]["name"] = "pong";
        CHECK_THROWS_AS(io::ExperimentConfig::from_json(j), ValidationError);
        j = cfg.to_json();
        j["env"]["discount"] = 1.0;
        CHECK_THROWS_AS(io::ExperimentConfig::from_json(j), ValidationError);
        j = cfg.to_json();
        j["rl"]["entropy_coef"] = -0.5;
        CHECK_THROWS_AS(io::ExperimentConfig::from_json(j), ValidationError);
        j = cfg.to_json();
        j["eval"]["costs"] = json::array();
        CHECK_THROWS_AS(io::ExperimentConfig::from_json(j), ValidationError);
    }
    SUBCASE("missing keys keep defaults") {
        const io::ExperimentConfig back =
            io::ExperimentConfig::from_json(json{{"master_seed", 7}});
        CHECK(back.master_seed == 7);
        CHECK(back.rl.workers == cfg.rl.workers);
        CHECK(back.env.name == cfg.env.name);
    }
}

TEST_CASE("config overrides apply dotted paths and reject typos") {
    const io::ExperimentConfig cfg;
    json j = cfg.to_json();
    io::apply_override(j, "rl.workers=3");
    io::apply_override(j, "model.beta=0.25");
    io::apply_override(j, "dataset.random_only=true");
    io::apply_override(j, "env.name=bouncing_ball");
    const io::ExperimentConfig back = io::ExperimentConfig::from_json(j);
    CHECK(back.rl.workers == 3);
    CHECK(back.model.beta == 0.25);
    CHECK(back.dataset.random_only == true);
    CHECK(back.env.name == "bouncing_ball");

    json j2 = cfg.to_json();
    io::apply_override(j2, "rl.wrokers=3");  // typo becomes an unknown key
    try {
        io::ExperimentConfig::from_json(j2);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("rl.wrokers") != std::string::npos);
    }

    json j3 = cfg.to_json();
    CHECK_THROWS_AS(io::apply_override(j3, "rl.workers"), ValidationError);
    CHECK_THROWS_AS(io::apply_override(j3, "=5"), ValidationError);
    CHECK_THROWS_AS(io::apply_override(j3, "rl..workers=5"), ValidationError);
    CHECK_THROWS_AS(io::apply_override(j3, "rl.workers.deep=5"), ValidationError);
}

TEST_CASE("config files load with overrides and from_defaults picks the env") {
    TempDir dir("config_load");
    const io::ExperimentConfig cfg;
    {
        std::ofstream f(dir.sub("cfg.json"));
        f << cfg.to_json().dump(1);
    }
    const io::ExperimentConfig loaded =
        io::ExperimentConfig::load(dir.sub("cfg.json"), {"rl.rollout_length=5"});
    CHECK(loaded.rl.rollout_length == 5);

    CHECK_THROWS_AS(io::ExperimentConfig::load(dir.sub("missing.json")), ValidationError);
    {
        std::ofstream f(dir.sub("broken.json"));
        f << "{ not json";
    }
    CHECK_THROWS_AS(io::ExperimentConfig::load(dir.sub("broken.json")), ValidationError);

    const io::ExperimentConfig ball = io::ExperimentConfig::from_defaults("bouncing_ball");
    CHECK(ball.env.name == "bouncing_ball");
    CHECK(ball.env.dynamics_file.empty());
    const io::ExperimentConfig sepsis = io::ExperimentConfig::from_defaults("sepsis");
    CHECK(sepsis.env.name == "sepsis");
    CHECK(sepsis.env.dynamics_file == "data/sepsis_dynamics.json");
}

TEST_CASE("metrics writer emits the fixed schema deterministically") {
    TempDir dir("metrics");
    const std::string path = dir.sub("train_metrics.csv");
    {
        io::MetricsWriter w(path, /*deterministic_timing=*/true);
        io::MetricsRow row;
        row.env_steps = 0;
        row.updates = 0;
        row.mean_task_reward = 0.5;
        row.mean_cost_adjusted_return = 0.25;
        row.mean_episodic_acquisitions = 12.5;
        row.discharge_rate = 0.75;
        row.mortality_rate = 0.125;
        row.wall_seconds = 123.0;  // must be forced to 0 in deterministic mode
        w.append(row);
        row.env_steps = 50000;
        row.updates = 2500;
        w.append(row);
    }
    CHECK(slurp_text(path) ==
          std::string(io::MetricsWriter::header()) +
              "\n0,0,0.5,0.25,12.5,0.75,0.125,0\n50000,2500,0.5,0.25,12.5,0.75,0.125,0\n");

    // Re-opening appends rows without repeating the header.
    {
        io::MetricsWriter w(path, true);
        io::MetricsRow row;
        row.env_steps = 100000;
        row.updates = 5000;
        w.append(row);
    }
    const io::CsvTable table = io::read_csv(path);
    CHECK(table.columns.size() == 8);
    CHECK(table.columns[0] == "env_steps");
    CHECK(table.columns[7] == "wall_seconds");
    REQUIRE(table.rows.size() == 3);
    CHECK(table.column("env_steps") == std::vector<double>{0.0, 50000.0, 100000.0});
    CHECK(table.column("wall_seconds") == std::vector<double>{0.0, 0.0, 0.0});

    // Wall-clock mode reports nonnegative, nondecreasing times.
    const std::string wall_path = dir.sub("wall.csv");
    {
        io::MetricsWriter w(wall_path, false);
        w.append(io::MetricsRow{});
        w.append(io::MetricsRow{});
    }
    const std::vector<double> wall = io::read_csv(wall_path).column("wall_seconds");
    REQUIRE(wall.size() == 2);
    CHECK(wall[0] >= 0.0);
    CHECK(wall[1] >= wall[0]);
}

TEST_CASE("csv reader rejects malformed tables naming the spot") {
    TempDir dir("csv_errors");
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream f(dir.sub(name));
        f << text;
        return dir.sub(name);
    };

    CHECK_THROWS_AS(io::read_csv(dir.sub("absent.csv")), ValidationError);
    CHECK_THROWS_AS(io::read_csv(write_text("empty.csv", "")), ValidationError);
    CHECK_THROWS_AS(io::read_csv(write_text("unnamed.csv", "a,,c\n1,2,3\n")), ValidationError);

    try {
        io::read_csv(write_text("ragged.csv", "a,b\n1,2\n3\n"));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    try {
        io::read_csv(write_text("text.csv", "a,b\n1,two\n"));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("column b") != std::string::npos);
    }

    const io::CsvTable ok = io::read_csv(write_text("ok.csv", "a,b\n1,2\n"));
    CHECK(ok.column_index("a") == 0);
    CHECK(ok.column_index("zz") == -1);
    CHECK_THROWS_AS(ok.column("zz"), ValidationError);
}

TEST_CASE("tidy csv uses the long format and is byte-stable") {
    TempDir dir("tidy");
    std::vector<io::TidyRow> rows;
    rows.push_back({"run-a", 1, 0.01, 0, "mean_task_reward", 0.5});
    rows.push_back({"run-a", 1, 0.01, 50000, "mean_task_reward", 0.75});
    rows.push_back({"run-b", 2, 0.025, 0, "mean_episodic_acquisitions", 30.0});
    io::write_tidy_csv(dir.sub("tidy.csv"), rows);
    CHECK(slurp_text(dir.sub("tidy.csv")) ==
          "run_id,seed,cost,env_steps,metric,value\n"
          "run-a,1,0.01,0,mean_task_reward,0.5\n"
          "run-a,1,0.01,50000,mean_task_reward,0.75\n"
          "run-b,2,0.025,0,mean_episodic_acquisitions,30\n");
    io::write_tidy_csv(dir.sub("tidy2.csv"), rows);
    CHECK(slurp(dir.sub("tidy.csv")) == slurp(dir.sub("tidy2.csv")));
}

TEST_CASE("canvas draws and serializes a well-formed 24-bit bmp") {
    TempDir dir("bmp");
    const io::Color white{255, 255, 255}, red{200, 30, 40}, blue{20, 40, 200};
    io::Canvas canvas(37, 11, white);  // odd width exercises row padding
    CHECK(canvas.pixel(0, 0).r == 255);
    canvas.set_pixel(3, 2, red);
    CHECK(canvas.pixel(3, 2).g == 30);
    canvas.set_pixel(-5, 100, red);  // silently clipped
    CHECK_THROWS_AS(canvas.pixel(-5, 100), ContractViolation);

    canvas.line(0, 10, 36, 10, blue);
    CHECK(canvas.pixel(0, 10).b == 200);
    CHECK(canvas.pixel(36, 10).b == 200);
    canvas.fill_rect(30, 0, 200, 5, blue);  // clipped at the right edge
    CHECK(canvas.pixel(36, 5).b == 200);

    const int before = [&] {
        int n = 0;
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 37; ++x)
                if (canvas.pixel(x, y).r != 255) ++n;
        return n;
    }();
    canvas.text(1, 1, "A1", {0, 0, 0});
    int after = 0;
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 37; ++x)
            if (canvas.pixel(x, y).r != 255) ++after;
    CHECK(after > before);  // glyphs actually rasterized
    CHECK(io::Canvas::text_width("A1") == 11);
    CHECK(io::Canvas::text_height() == 7);

    canvas.save_bmp(dir.sub("plot.bmp"));
    const std::vector<char> bytes = slurp(dir.sub("plot.bmp"));
    const int padded_row = 112;  // 37*3 = 111, padded to a 4-byte boundary
    REQUIRE(bytes.size() == 54 + static_cast<size_t>(padded_row) * 11);
    CHECK(bytes[0] == 'B');
    CHECK(bytes[1] == 'M');
    auto u32_at = [&](size_t off) {
        uint32_t v;
        std::memcpy(&v, bytes.data() + off, 4);
        return v;
    };
    auto u16_at = [&](size_t off) {
        uint16_t v;
        std::memcpy(&v, bytes.data() + off, 2);
        return v;
    };
    CHECK(u32_at(2) == bytes.size());
    CHECK(u32_at(10) == 54);  // pixel data offset
    CHECK(u32_at(18) == 37);  // width
    CHECK(u32_at(22) == 11);  // height
    CHECK(u16_at(28) == 24);  // bits per pixel
    // Rows are bottom-up BGR: the first stored pixel is canvas (0, 10), blue.
    CHECK(static_cast<uint8_t>(bytes[54]) == 200);   // B
    CHECK(static_cast<uint8_t>(bytes[55]) == 40);    // G
    CHECK(static_cast<uint8_t>(bytes[56]) == 20);    // R
    // The last row in the file is canvas row 0: pixel (3, 2) lives earlier,
    // check top-left corner (0, 0) is still white.
    const size_t top_row_off = 54 + static_cast<size_t>(padded_row) * 10;
    CHECK(static_cast<uint8_t>(bytes[top_row_off]) == 255);

    CHECK_THROWS_AS(io::Canvas(0, 5, white), ContractViolation);
}
