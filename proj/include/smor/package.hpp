#pragma once

// Binary containers for the offline package and the full-order reference
// trajectory. Layout: docs/package_format.md.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "smor/greedy.hpp"
#include "smor/integrators.hpp"
#include "smor/rom.hpp"

namespace smor {

static_assert(std::endian::native == std::endian::little, "package I/O assumes a little-endian host");

inline constexpr char package_magic[8] = {'S', 'M', 'O', 'R', 'P', 'K', 'G', '1'};
inline constexpr char reference_magic[8] = {'S', 'M', 'O', 'R', 'R', 'E', 'F', '1'};
inline constexpr std::uint32_t package_version = 1;

struct PackagedVariant {
    std::string name;
    std::string method;
    ReducedModel rom;  // f is not stored; attach the model nonlinearity after reading
    Matrix basis_B;    // B = X·A for symplectic variants, empty for POD
    std::vector<GreedyReport> reports;
};

struct OfflinePackage {
    std::string provenance;  // JSON text: configuration, tolerances, snapshot counts
    Vector sigma_S;
    Vector sigma_XS;
    std::vector<PackagedVariant> variants;
};

namespace detail {

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), os_(path, std::ios::binary | std::ios::trunc) {
        if (!os_) throw IoError("cannot open " + path + " for writing");
    }
    void raw(const void* p, std::size_t n) {
        os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!os_) throw IoError("write failed: " + path_);
    }
    template <typename T>
    void pod(T v) { raw(&v, sizeof(T)); }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        raw(s.data(), s.size());
    }
    void mat(const Matrix& m) {
        pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
        pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
        raw(rm.data(), sizeof(double) * static_cast<std::size_t>(rm.size()));
    }
    void idx(const std::vector<Index>& v) {
        pod<std::uint64_t>(v.size());
        for (Index i : v) pod<std::int64_t>(static_cast<std::int64_t>(i));
    }
    void dbl(const std::vector<double>& v) {
        pod<std::uint64_t>(v.size());
        raw(v.data(), sizeof(double) * v.size());
    }
    void close() {
        os_.close();
        if (!os_) throw IoError("close failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream os_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), is_(path, std::ios::binary) {
        if (!is_) throw IoError("cannot open " + path);
    }
    void raw(void* p, std::size_t n) {
        is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!is_) throw IoError("truncated file: " + path_);
    }
    template <typename T>
    T pod() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    std::uint64_t count(std::uint64_t limit = (1ull << 34)) {
        const auto n = pod<std::uint64_t>();
        if (n > limit) throw IoError("corrupt size field in " + path_);
        return n;
    }
    std::string str() {
        std::string s(count(), '\0');
        raw(s.data(), s.size());
        return s;
    }
    Matrix mat() {
        const auto r = count(), c = count();
        if (r * c > (1ull << 34)) throw IoError("corrupt matrix size in " + path_);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(static_cast<Index>(r),
                                                                                 static_cast<Index>(c));
        raw(rm.data(), sizeof(double) * static_cast<std::size_t>(rm.size()));
        return rm;
    }
    std::vector<Index> idx() {
        std::vector<Index> v(count());
        for (auto& i : v) i = static_cast<Index>(pod<std::int64_t>());
        return v;
    }
    std::vector<double> dbl() {
        std::vector<double> v(count());
        raw(v.data(), sizeof(double) * v.size());
        return v;
    }
    void magic(const char (&m)[8]) {
        char buf[8];
        raw(buf, 8);
        if (std::memcmp(buf, m, 8) != 0) throw IoError("bad magic in " + path_);
        const auto v = pod<std::uint32_t>();
        if (v != package_version)
            throw VersionError(path_ + ": format version " + std::to_string(v) + ", expected " +
                               std::to_string(package_version));
    }
    void expect_end() {
        is_.peek();
        if (!is_.eof()) throw IoError("trailing bytes in " + path_);
    }

private:
    std::string path_;
    std::ifstream is_;
};

inline Vector as_vector(const Matrix& m) {
    if (m.size() == 0) return Vector(0);
    return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace detail

inline void write_package(const std::string& path, const OfflinePackage& pkg) {
    detail::Writer w(path);
    w.raw(package_magic, 8);
    w.pod(package_version);
    w.str(pkg.provenance);
    w.mat(pkg.sigma_S);
    w.mat(pkg.sigma_XS);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(pkg.variants.size()));
    for (const auto& v : pkg.variants) {
        const ReducedModel& r = v.rom;
        w.str(v.name);
        w.str(v.method);
        w.pod<std::uint8_t>(static_cast<std::uint8_t>(r.kind));
        w.pod<std::uint8_t>(static_cast<std::uint8_t>(r.path));
        w.pod<double>(r.h_offset);
        for (const Matrix* m : {&r.decoder, &v.basis_B, &r.J_r, &r.L_r})
            w.mat(*m);
        w.mat(r.c_r);
        w.mat(r.K);
        w.mat(r.b);
        w.mat(r.y0);
        w.mat(r.lift);
        w.mat(r.grad_lift);
        w.mat(r.stencil_decoder);
        w.idx(r.deim_rows);
        w.idx(r.stencil_offsets);
        w.idx(r.stencil_cols);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(v.reports.size()));
        for (const auto& rep : v.reports) {
            w.str(rep.phase);
            w.pod<std::int64_t>(rep.k_initial);
            w.pod<std::int64_t>(rep.k_final);
            w.pod<std::int64_t>(rep.deflation_events);
            w.idx(rep.selected);
            w.dbl(rep.errors);
        }
    }
    w.close();
}

inline OfflinePackage read_package(const std::string& path) {
    detail::Reader r(path);
    r.magic(package_magic);
    OfflinePackage pkg;
    pkg.provenance = r.str();
    pkg.sigma_S = detail::as_vector(r.mat());
    pkg.sigma_XS = detail::as_vector(r.mat());
    const auto nv = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < nv; ++i) {
        PackagedVariant v;
        ReducedModel& m = v.rom;
        v.name = r.str();
        v.method = r.str();
        const auto kind = r.pod<std::uint8_t>();
        const auto path_id = r.pod<std::uint8_t>();
        if (kind > 1 || path_id > 3) throw IoError("corrupt variant header in " + path);
        m.kind = static_cast<RomKind>(kind);
        m.path = static_cast<NonlinearPath>(path_id);
        m.h_offset = r.pod<double>();
        m.decoder = r.mat();
        v.basis_B = r.mat();
        m.J_r = r.mat();
        m.L_r = r.mat();
        m.c_r = detail::as_vector(r.mat());
        m.K = r.mat();
        m.b = detail::as_vector(r.mat());
        m.y0 = detail::as_vector(r.mat());
        m.lift = r.mat();
        m.grad_lift = r.mat();
        m.stencil_decoder = r.mat();
        m.deim_rows = r.idx();
        m.stencil_offsets = r.idx();
        m.stencil_cols = r.idx();
        const auto nr = r.pod<std::uint32_t>();
        for (std::uint32_t j = 0; j < nr; ++j) {
            GreedyReport rep;
            rep.phase = r.str();
            rep.k_initial = r.pod<std::int64_t>();
            rep.k_final = r.pod<std::int64_t>();
            rep.deflation_events = r.pod<std::int64_t>();
            rep.selected = r.idx();
            rep.errors = r.dbl();
            v.reports.push_back(std::move(rep));
        }
        pkg.variants.push_back(std::move(v));
    }
    r.expect_end();
    return pkg;
}

inline void write_reference(const std::string& path, const Trajectory& tr) {
    detail::Writer w(path);
    w.raw(reference_magic, 8);
    w.pod(package_version);
    w.dbl(tr.states.times);
    w.mat(tr.states.states);
    w.dbl(tr.hamiltonian);
    w.close();
}

inline Trajectory read_reference(const std::string& path) {
    detail::Reader r(path);
    r.magic(reference_magic);
    Trajectory tr;
    tr.states.times = r.dbl();
    tr.states.states = r.mat();
    tr.hamiltonian = r.dbl();
    r.expect_end();
    if (static_cast<Index>(tr.states.times.size()) != tr.states.states.cols())
        throw IoError("reference: time count does not match state count in " + path);
    return tr;
}

}  // namespace smor
