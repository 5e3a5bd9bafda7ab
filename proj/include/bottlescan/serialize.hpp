#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bottlescan {

// Little-endian binary stream helpers for model artifacts. Doubles are
// written as raw IEEE-754 bits so round trips are exact.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw_le(v); }
    void u64(std::uint64_t v) { raw_le(v); }
    void i32(std::int32_t v) { raw_le(static_cast<std::uint32_t>(v)); }
    void f64(double v) { raw_le(std::bit_cast<std::uint64_t>(v)); }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void vec(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    void veci(const Eigen::VectorXi& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) i32(v[i]);
    }
    void mat(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }

private:
    template <typename T>
    void raw_le(T v) {
        std::uint8_t buf[sizeof(T)];
        for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
        raw(buf, sizeof(T));
    }
    void raw(const void* p, size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw std::runtime_error("binary write failed");
    }
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() { return read_le<std::uint32_t>(); }
    std::uint64_t u64() { return read_le<std::uint64_t>(); }
    std::int32_t i32() { return static_cast<std::int32_t>(read_le<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(read_le<std::uint64_t>()); }

    std::string str() {
        std::string s(u32(), '\0');
        raw(s.data(), s.size());
        return s;
    }
    Eigen::VectorXd vec() {
        Eigen::VectorXd v(static_cast<Eigen::Index>(u64()));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
    Eigen::VectorXi veci() {
        Eigen::VectorXi v(static_cast<Eigen::Index>(u64()));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = i32();
        return v;
    }
    Eigen::MatrixXd mat() {
        const auto rows = static_cast<Eigen::Index>(u64());
        const auto cols = static_cast<Eigen::Index>(u64());
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
        return m;
    }

private:
    template <typename T>
    T read_le() {
        std::uint8_t buf[sizeof(T)];
        raw(buf, sizeof(T));
        T v = 0;
        for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }
    void raw(void* p, size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw std::runtime_error("binary read failed: truncated artifact");
    }
    std::istream& in_;
};

}  // namespace bottlescan
