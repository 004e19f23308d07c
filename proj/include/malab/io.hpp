#pragma once

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "malab/potential.hpp"

namespace malab {

/// Field files carry a one-line JSON header describing the grid followed by
/// the node values: CSV rows "x_1,...,x_n,value" for .csv paths, raw
/// little-endian doubles otherwise. Round-trip is exact on the same platform
/// (CSV uses 17 significant digits).
namespace io {

using nlohmann::json;

inline json grid_header(int dim, const std::vector<double>& lo, const std::vector<double>& hi,
                        const std::vector<int>& counts) {
    return json{{"dim", dim}, {"lo", lo}, {"hi", hi}, {"counts", counts}};
}

template <int N>
json header_of(const PotentialField<N>& p) {
    std::vector<double> lo(p.grid().lo.begin(), p.grid().lo.end());
    std::vector<double> hi(p.grid().hi.begin(), p.grid().hi.end());
    std::vector<int> counts(p.grid().counts.begin(), p.grid().counts.end());
    json h = grid_header(N, lo, hi, counts);
    h["certificate"] = to_string(p.certificate);
    if (std::isfinite(p.residual)) h["residual"] = p.residual;
    if (p.source) h["source"] = p.source->describe();
    return h;
}

inline bool is_csv_path(const std::string& path) {
    return path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
}

template <int N>
void write_field(const std::string& path, const PotentialField<N>& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path + " for writing");
    os << header_of(p).dump() << "\n";
    if (is_csv_path(path)) {
        os.precision(17);
        for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
            const Point<N> x = p.grid().coord(ix);
            for (int a = 0; a < N; ++a) os << x[a] << ",";
            os << p.u[k] << "\n";
        });
    } else {
        os.write(reinterpret_cast<const char*>(p.u.values.data()),
                 static_cast<std::streamsize>(p.u.values.size() * sizeof(double)));
    }
    if (!os) throw InputError("failed writing " + path);
}

struct LoadedField {
    int dim = 0;
    json header;
    std::vector<double> values;
    std::vector<double> lo, hi;
    std::vector<int> counts;
};

inline LoadedField read_field_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path);
    std::string line;
    std::getline(is, line);
    LoadedField f;
    f.header = json::parse(line, nullptr, false);
    if (f.header.is_discarded()) throw InputError("bad field header in " + path);
    f.dim = f.header.at("dim").get<int>();
    f.lo = f.header.at("lo").get<std::vector<double>>();
    f.hi = f.header.at("hi").get<std::vector<double>>();
    f.counts = f.header.at("counts").get<std::vector<int>>();
    std::size_t total = 1;
    for (int c : f.counts) total *= static_cast<std::size_t>(c);
    f.values.resize(total);
    if (is_csv_path(path)) {
        for (std::size_t k = 0; k < total; ++k) {
            if (!std::getline(is, line)) throw InputError("truncated CSV field in " + path);
            const auto pos = line.find_last_of(',');
            if (pos == std::string::npos) throw InputError("bad CSV row in " + path);
            f.values[k] = std::stod(line.substr(pos + 1));
        }
    } else {
        is.read(reinterpret_cast<char*>(f.values.data()),
                static_cast<std::streamsize>(total * sizeof(double)));
        if (static_cast<std::size_t>(is.gcount()) != total * sizeof(double))
            throw InputError("truncated binary field in " + path);
    }
    return f;
}

template <int N>
PotentialField<N> to_potential(const LoadedField& f) {
    if (f.dim != N) throw InputError("field dimension mismatch");
    Point<N> lo, hi;
    Index<N> counts;
    for (int a = 0; a < N; ++a) {
        lo[a] = f.lo[a];
        hi[a] = f.hi[a];
        counts[a] = f.counts[a];
    }
    ScalarField<N> u(GridSpec<N>(lo, hi, counts));
    u.values = f.values;
    Certificate cert = Certificate::none;
    if (f.header.contains("certificate")) {
        const std::string c = f.header["certificate"];
        if (c == "exact_family") cert = Certificate::exact_family;
        if (c == "solver") cert = Certificate::solver;
    }
    auto p = make_potential(std::move(u), cert);
    if (f.header.contains("residual")) p.residual = f.header["residual"].get<double>();
    return p;
}

template <int N>
PotentialField<N> read_field(const std::string& path) {
    return to_potential<N>(read_field_raw(path));
}

/// Reproducibility hash over grid layout, certificate, and node values.
template <int N>
std::uint64_t field_hash(const PotentialField<N>& p) {
    std::vector<double> lo(p.grid().lo.begin(), p.grid().lo.end());
    std::vector<double> hi(p.grid().hi.begin(), p.grid().hi.end());
    std::vector<int> counts(p.grid().counts.begin(), p.grid().counts.end());
    json h = grid_header(N, lo, hi, counts);
    h["certificate"] = to_string(p.certificate);
    std::uint64_t hash = fnv1a(h.dump());
    hash = fnv1a(p.u.values.data(), p.u.values.size() * sizeof(double), hash);
    return hash;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path + " for writing");
    os << text;
}

}  // namespace io
}  // namespace malab
