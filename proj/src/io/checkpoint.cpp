#include "afa/io/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "afa/core/errors.hpp"
#include "afa/io/dataset.hpp"

namespace afa::io {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'F', 'A', 'C', 'H', 'K', 'P', '1'};

struct RawCheckpoint {
    json header;
    std::vector<char> data;
};

RawCheckpoint read_raw(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IntegrityError("checkpoint: cannot open " + path);
    const size_t size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    if (size < 16) throw IntegrityError("checkpoint: file too short: " + path);

    char magic[8];
    uint64_t header_len = 0;
    f.read(magic, 8);
    f.read(reinterpret_cast<char*>(&header_len), 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw IntegrityError("checkpoint: bad magic in " + path);
    if (16 + header_len > size)
        throw IntegrityError("checkpoint: header overruns file: " + path);

    std::string header_text(header_len, '\0');
    f.read(header_text.data(), static_cast<std::streamsize>(header_len));
    RawCheckpoint raw;
    try {
        raw.header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw IntegrityError("checkpoint: malformed header: " + std::string(e.what()));
    }
    raw.data.resize(size - 16 - header_len);
    f.read(raw.data.data(), static_cast<std::streamsize>(raw.data.size()));
    if (!f) throw IntegrityError("checkpoint: short read from " + path);

    try {
        if (raw.header.at("data_bytes").get<size_t>() != raw.data.size())
            throw IntegrityError("checkpoint: data section is " +
                                 std::to_string(raw.data.size()) + " bytes but header expects " +
                                 std::to_string(raw.header.at("data_bytes").get<size_t>()));
        const std::string want = raw.header.at("data_fnv64").get<std::string>();
        const std::string got = fnv_hex(fnv1a64(raw.data.data(), raw.data.size()));
        if (want != got)
            throw IntegrityError("checkpoint: data checksum mismatch (header " + want +
                                 ", actual " + got + ")");
    } catch (const json::exception& e) {
        throw IntegrityError("checkpoint: header field error: " + std::string(e.what()));
    }
    return raw;
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::ParameterSet& params,
                     const json& meta) {
    std::vector<char> data;
    json tensors = json::array();
    for (const auto& p : params.all()) {
        tensors.push_back(json{{"name", p->name},
                               {"rows", p->value.rows()},
                               {"cols", p->value.cols()},
                               {"offset", data.size()}});
        for (Eigen::Index i = 0; i < p->value.rows(); ++i)
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                const float v = static_cast<float>(p->value(i, j));
                const size_t at = data.size();
                data.resize(at + 4);
                std::memcpy(data.data() + at, &v, 4);
            }
    }
    const json header{{"format", 1},
                      {"tensors", std::move(tensors)},
                      {"data_bytes", data.size()},
                      {"data_fnv64", fnv_hex(fnv1a64(data.data(), data.size()))},
                      {"meta", meta}};
    const std::string header_text = header.dump();

    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IntegrityError("checkpoint: cannot open " + path + " for writing");
    const uint64_t header_len = header_text.size();
    f.write(kMagic, 8);
    f.write(reinterpret_cast<const char*>(&header_len), 8);
    f.write(header_text.data(), static_cast<std::streamsize>(header_len));
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!f) throw IntegrityError("checkpoint: short write to " + path);
}

json load_checkpoint(const std::string& path, nn::ParameterSet& params) {
    RawCheckpoint raw = read_raw(path);
    try {
        const json& tensors = raw.header.at("tensors");
        if (tensors.size() != params.count())
            throw IntegrityError("checkpoint: holds " + std::to_string(tensors.size()) +
                                 " tensors but the model expects " +
                                 std::to_string(params.count()));
        for (const json& t : tensors) {
            const std::string name = t.at("name").get<std::string>();
            nn::Parameter* p = params.find(name);
            if (!p) throw IntegrityError("checkpoint: unexpected tensor " + name);
            const Eigen::Index rows = t.at("rows").get<Eigen::Index>();
            const Eigen::Index cols = t.at("cols").get<Eigen::Index>();
            if (rows != p->value.rows() || cols != p->value.cols())
                throw IntegrityError("checkpoint: tensor " + name + " is " +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     " but the model expects " +
                                     std::to_string(p->value.rows()) + "x" +
                                     std::to_string(p->value.cols()));
            const size_t offset = t.at("offset").get<size_t>();
            const size_t need = static_cast<size_t>(rows) * cols * 4;
            if (offset + need > raw.data.size())
                throw IntegrityError("checkpoint: tensor " + name + " overruns the data section");
            const char* src = raw.data.data() + offset;
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) {
                    float v;
                    std::memcpy(&v, src, 4);
                    src += 4;
                    p->value(i, j) = static_cast<double>(v);
                }
        }
        return raw.header.at("meta");
    } catch (const json::exception& e) {
        throw IntegrityError("checkpoint: header field error: " + std::string(e.what()));
    }
}

json read_checkpoint_meta(const std::string& path) {
    RawCheckpoint raw = read_raw(path);
    try {
        return raw.header.at("meta");
    } catch (const json::exception& e) {
        throw IntegrityError("checkpoint: header field error: " + std::string(e.what()));
    }
}

}  // namespace afa::io
