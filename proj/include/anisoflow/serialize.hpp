#pragma once

// Field persistence. Two equivalent encodings of the same record
// {n_h, n_v, interleaved complex coefficients in row-major k order}:
//   - flat binary, magic "AFLD", version-tagged, little-endian doubles
//   - JSON, for hand inspection and config-embedded targets
// Row-major k order means k1 slow, k2 fast, components interleaved per k:
// re(u1), im(u1), re(u2), im(u2).

#include <anisoflow/field.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aniso {

inline constexpr std::uint32_t field_format_version = 1;

inline void save_field_binary(const SpectralField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_field_binary: cannot open " + path);
    const Grid& g = f.grid();
    out.write("AFLD", 4);
    const std::uint32_t ver = field_format_version;
    const std::uint32_t nh = std::uint32_t(g.n_h), nv = std::uint32_t(g.n_v);
    out.write(reinterpret_cast<const char*>(&ver), 4);
    out.write(reinterpret_cast<const char*>(&nh), 4);
    out.write(reinterpret_cast<const char*>(&nv), 4);
    out.write(reinterpret_cast<const char*>(&g.dealias_fraction), 8);
    std::vector<double> row(4);
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            row[0] = f.at(0, k1, k2).real();
            row[1] = f.at(0, k1, k2).imag();
            row[2] = f.at(1, k1, k2).real();
            row[3] = f.at(1, k1, k2).imag();
            out.write(reinterpret_cast<const char*>(row.data()), 32);
        }
    if (!out) throw std::runtime_error("save_field_binary: write failed for " + path);
}

inline SpectralField load_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_field_binary: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "AFLD", 4) != 0)
        throw std::runtime_error("load_field_binary: bad magic in " + path);
    std::uint32_t ver = 0, nh = 0, nv = 0;
    double fraction = 0.0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    in.read(reinterpret_cast<char*>(&nh), 4);
    in.read(reinterpret_cast<char*>(&nv), 4);
    in.read(reinterpret_cast<char*>(&fraction), 8);
    if (!in || ver != field_format_version)
        throw std::runtime_error("load_field_binary: unsupported version in " + path);
    Grid g(int(nh), int(nv), fraction);
    SpectralField f(g);
    std::vector<double> row(4);
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2) {
            in.read(reinterpret_cast<char*>(row.data()), 32);
            if (!in) throw std::runtime_error("load_field_binary: truncated file " + path);
            f.at(0, k1, k2) = cplx{row[0], row[1]};
            f.at(1, k1, k2) = cplx{row[2], row[3]};
        }
    return f;
}

inline nlohmann::json field_to_json(const SpectralField& f) {
    const Grid& g = f.grid();
    nlohmann::json j;
    j["format"] = "anisoflow-field";
    j["version"] = field_format_version;
    j["n_h"] = g.n_h;
    j["n_v"] = g.n_v;
    j["dealias_fraction"] = g.dealias_fraction;
    auto coeffs = nlohmann::json::array();
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2)
            coeffs.push_back({f.at(0, k1, k2).real(), f.at(0, k1, k2).imag(),
                              f.at(1, k1, k2).real(), f.at(1, k1, k2).imag()});
    j["coeffs"] = std::move(coeffs);
    return j;
}

inline SpectralField field_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "anisoflow-field" ||
        j.value("version", 0u) != field_format_version)
        throw std::runtime_error("field_from_json: not a version-" +
                                 std::to_string(field_format_version) + " field record");
    Grid g(j.at("n_h").get<int>(), j.at("n_v").get<int>(),
           j.value("dealias_fraction", 2.0 / 3.0));
    const auto& coeffs = j.at("coeffs");
    if (coeffs.size() != g.size())
        throw std::runtime_error("field_from_json: coefficient count mismatch");
    SpectralField f(g);
    std::size_t i = 0;
    for (int k1 = -g.half_h(); k1 <= g.half_h(); ++k1)
        for (int k2 = -g.half_v(); k2 <= g.half_v(); ++k2, ++i) {
            const auto& row = coeffs[i];
            f.at(0, k1, k2) = cplx{row[0].get<double>(), row[1].get<double>()};
            f.at(1, k1, k2) = cplx{row[2].get<double>(), row[3].get<double>()};
        }
    return f;
}

inline void save_field_json(const SpectralField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_field_json: cannot open " + path);
    out << field_to_json(f).dump(2) << "\n";
}

inline SpectralField load_field_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_field_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return field_from_json(j);
}

} // namespace aniso
