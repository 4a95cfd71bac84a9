#include "afa/io/dataset.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "afa/core/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset blobs are little-endian; big-endian hosts need byte swaps");

namespace afa::io {

using nlohmann::json;

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

namespace {

void append_bytes(std::vector<char>& blob, const void* p, size_t n) {
    const size_t at = blob.size();
    blob.resize(at + n);
    std::memcpy(blob.data() + at, p, n);
}

template <typename T>
void append_pod(std::vector<char>& blob, const T& v) {
    append_bytes(blob, &v, sizeof(T));
}

// Bytes one trajectory occupies in the blob; the manifest offsets must agree
// with this exactly.
size_t record_bytes(int length, int obs_dim, int n_features, bool has_supervision) {
    const size_t T = static_cast<size_t>(length);
    const size_t dim = static_cast<size_t>(obs_dim);
    return T * dim * 4           // observations (f32)
           + T * dim             // masks (u8)
           + T * 4               // controls (i32)
           + T * n_features      // acquisitions (u8)
           + T * 4               // rewards (f32)
           + T * 4               // costs (f32)
           + 1                   // terminal flag (u8)
           + (has_supervision ? dim : 0);
}

json descriptor_to_json(const EnvDescriptor& desc) {
    return json{{"name", desc.name},
                {"n_features", desc.n_features},
                {"obs_shape", desc.obs_shape},
                {"n_control_actions", desc.n_control_actions},
                {"max_steps", desc.max_steps},
                {"feature_group_map", desc.feature_group_map}};
}

EnvDescriptor descriptor_from_json(const json& j) {
    EnvDescriptor desc;
    desc.name = j.at("name").get<std::string>();
    desc.n_features = j.at("n_features").get<int>();
    desc.obs_shape = j.at("obs_shape").get<std::vector<int>>();
    desc.n_control_actions = j.at("n_control_actions").get<int>();
    desc.max_steps = j.at("max_steps").get<int>();
    desc.feature_group_map = j.at("feature_group_map").get<std::vector<std::vector<int>>>();
    desc.validate();
    return desc;
}

}  // namespace

void write_dataset(const std::string& dir, const EnvDescriptor& desc, const CostModel& cm,
                   const std::vector<TrajectoryRecord>& records, const DatasetMeta& meta) {
    desc.validate();
    cm.validate();
    const int dim = desc.obs_dim();

    std::vector<char> blob;
    json offsets = json::array();
    for (size_t i = 0; i < records.size(); ++i) {
        const TrajectoryRecord& r = records[i];
        try {
            r.validate(desc, cm);
        } catch (const ContractViolation& e) {
            throw ValidationError("dataset write: trajectory " + std::to_string(i) +
                                  " is invalid: " + e.what());
        }
        offsets.push_back(json{{"length", r.length},
                               {"offset", blob.size()},
                               {"supervised", !r.supervision.empty()}});
        for (int t = 0; t < r.length; ++t)
            for (int d = 0; d < dim; ++d) append_pod(blob, r.observations(t, d));
        append_bytes(blob, r.masks.data(), r.masks.size());
        append_bytes(blob, r.controls.data(), r.controls.size() * 4);
        append_bytes(blob, r.acquisitions.data(), r.acquisitions.size());
        append_bytes(blob, r.rewards.data(), r.rewards.size() * 4);
        append_bytes(blob, r.costs.data(), r.costs.size() * 4);
        append_pod(blob, static_cast<uint8_t>(r.terminal_flag ? 1 : 0));
        append_bytes(blob, r.supervision.data(), r.supervision.size());
    }

    json manifest{{"format", "afa-dataset-v1"},
                  {"descriptor", descriptor_to_json(desc)},
                  {"cost", {{"unit_cost", cm.unit_cost}, {"discount", cm.discount}}},
                  {"meta",
                   {{"env_version", meta.env_version},
                    {"generator", meta.generator},
                    {"config_hash", meta.config_hash},
                    {"seed", meta.seed}}},
                  {"dtypes", "f32-le / u8 / i32-le"},
                  {"n_trajectories", records.size()},
                  {"trajectories", std::move(offsets)},
                  {"blob_bytes", blob.size()},
                  {"blob_fnv64", fnv_hex(fnv1a64(blob.data(), blob.size()))}};

    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/data.bin", std::ios::binary | std::ios::trunc);
        if (!f) throw IntegrityError("dataset write: cannot open " + dir + "/data.bin");
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw IntegrityError("dataset write: short write to " + dir + "/data.bin");
    }
    {
        std::ofstream f(dir + "/manifest.json", std::ios::trunc);
        if (!f) throw IntegrityError("dataset write: cannot open " + dir + "/manifest.json");
        f << manifest.dump(1) << "\n";
    }
}

Dataset read_dataset(const std::string& dir) {
    json manifest;
    {
        std::ifstream f(dir + "/manifest.json");
        if (!f) throw IntegrityError("dataset read: missing " + dir + "/manifest.json");
        try {
            f >> manifest;
        } catch (const json::exception& e) {
            throw IntegrityError("dataset read: malformed manifest: " + std::string(e.what()));
        }
    }
    std::vector<char> blob;
    {
        std::ifstream f(dir + "/data.bin", std::ios::binary | std::ios::ate);
        if (!f) throw IntegrityError("dataset read: missing " + dir + "/data.bin");
        blob.resize(static_cast<size_t>(f.tellg()));
        f.seekg(0);
        f.read(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw IntegrityError("dataset read: short read from " + dir + "/data.bin");
    }

    Dataset ds;
    try {
        if (manifest.at("format").get<std::string>() != "afa-dataset-v1")
            throw IntegrityError("dataset read: unknown format tag");
        ds.desc = descriptor_from_json(manifest.at("descriptor"));
        ds.cost.unit_cost = manifest.at("cost").at("unit_cost").get<double>();
        ds.cost.discount = manifest.at("cost").at("discount").get<double>();
        ds.meta.env_version = manifest.at("meta").at("env_version").get<std::string>();
        ds.meta.generator = manifest.at("meta").at("generator").get<std::string>();
        ds.meta.config_hash = manifest.at("meta").at("config_hash").get<std::string>();
        ds.meta.seed = manifest.at("meta").at("seed").get<uint64_t>();

        if (manifest.at("blob_bytes").get<size_t>() != blob.size())
            throw IntegrityError("dataset read: blob is " + std::to_string(blob.size()) +
                                 " bytes but manifest expects " +
                                 std::to_string(manifest.at("blob_bytes").get<size_t>()));
        const std::string want = manifest.at("blob_fnv64").get<std::string>();
        const std::string got = fnv_hex(fnv1a64(blob.data(), blob.size()));
        if (want != got)
            throw IntegrityError("dataset read: blob checksum mismatch (manifest " + want +
                                 ", actual " + got + ")");

        const json& trajs = manifest.at("trajectories");
        if (manifest.at("n_trajectories").get<size_t>() != trajs.size())
            throw IntegrityError("dataset read: trajectory count disagrees with offset table");

        const int dim = ds.desc.obs_dim();
        const int nf = ds.desc.n_features;
        for (size_t i = 0; i < trajs.size(); ++i) {
            const std::string where = "trajectory " + std::to_string(i);
            const int T = trajs[i].at("length").get<int>();
            const size_t offset = trajs[i].at("offset").get<size_t>();
            const bool supervised = trajs[i].at("supervised").get<bool>();
            const size_t need = record_bytes(T, dim, nf, supervised);
            const size_t expected_offset =
                i == 0 ? 0
                       : trajs[i - 1].at("offset").get<size_t>() +
                             record_bytes(trajs[i - 1].at("length").get<int>(), dim, nf,
                                          trajs[i - 1].at("supervised").get<bool>());
            if (T < 1 || offset != expected_offset || offset + need > blob.size())
                throw IntegrityError("dataset read: manifest shapes inconsistent at " + where);

            TrajectoryRecord r;
            r.length = T;
            const char* p = blob.data() + offset;
            r.observations.resize(T, dim);
            for (int t = 0; t < T; ++t)
                for (int d = 0; d < dim; ++d) {
                    std::memcpy(&r.observations(t, d), p, 4);
                    p += 4;
                }
            r.masks.resize(static_cast<size_t>(T) * dim);
            std::memcpy(r.masks.data(), p, r.masks.size());
            p += r.masks.size();
            r.controls.resize(T);
            std::memcpy(r.controls.data(), p, static_cast<size_t>(T) * 4);
            p += static_cast<size_t>(T) * 4;
            r.acquisitions.resize(static_cast<size_t>(T) * nf);
            std::memcpy(r.acquisitions.data(), p, r.acquisitions.size());
            p += r.acquisitions.size();
            r.rewards.resize(T);
            std::memcpy(r.rewards.data(), p, static_cast<size_t>(T) * 4);
            p += static_cast<size_t>(T) * 4;
            r.costs.resize(T);
            std::memcpy(r.costs.data(), p, static_cast<size_t>(T) * 4);
            p += static_cast<size_t>(T) * 4;
            r.terminal_flag = *p != 0;
            ++p;
            if (supervised) {
                r.supervision.resize(dim);
                std::memcpy(r.supervision.data(), p, r.supervision.size());
                p += r.supervision.size();
            }
            try {
                r.validate(ds.desc, ds.cost);
            } catch (const ContractViolation& e) {
                throw IntegrityError("dataset read: invalid record at " + where + ": " +
                                     e.what());
            }
            ds.records.push_back(std::move(r));
        }
        const size_t total =
            trajs.empty() ? 0
                          : trajs.back().at("offset").get<size_t>() +
                                record_bytes(trajs.back().at("length").get<int>(), dim, nf,
                                             trajs.back().at("supervised").get<bool>());
        if (total != blob.size())
            throw IntegrityError("dataset read: blob has trailing bytes beyond the offset table");
    } catch (const json::exception& e) {
        throw IntegrityError("dataset read: manifest field error: " + std::string(e.what()));
    }
    return ds;
}

}  // namespace afa::io
