#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specstat/error.hpp"

namespace specstat::core {

// 2-D non-negative intensity image, row-major, real-valued regardless of the
// bit depth it was loaded from. The whole pipeline operates per B-scan.
struct BScan {
    int height = 0;
    int width = 0;
    std::vector<double> pixels; // height * width, row-major

    double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
    double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }

    void validate() const {
        require(height >= 7 && width >= 7, "InvalidScan", "B-scan must be at least 7x7");
        require(pixels.size() == static_cast<std::size_t>(height) * width, "InvalidScan",
                "pixel buffer does not match dimensions");
        for (double v : pixels)
            require(std::isfinite(v) && v >= 0.0, "InvalidScan", "pixel values must be finite and >= 0");
    }
};

enum class ClassId : std::uint8_t { Background = 0, ILM = 1, RPE = 2, Tool = 3 };

inline constexpr int kNumClasses = 4;
// The three classes that get emitted as binary maps; Background never does.
inline constexpr ClassId kForegroundClasses[3] = {ClassId::ILM, ClassId::RPE, ClassId::Tool};

std::string to_string(ClassId c);
ClassId class_from_string(const std::string& s);

// Per-pixel binary mask for one class.
struct LabelMap {
    ClassId cls = ClassId::Background;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> mask; // 0/1, row-major

    static LabelMap empty(ClassId cls, int height, int width) {
        LabelMap m;
        m.cls = cls;
        m.height = height;
        m.width = width;
        m.mask.assign(static_cast<std::size_t>(height) * width, 0);
        return m;
    }

    bool at(int r, int c) const { return mask[static_cast<std::size_t>(r) * width + c] != 0; }
    void set(int r, int c, bool v) { mask[static_cast<std::size_t>(r) * width + c] = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : mask)
            n += v != 0;
        return n;
    }
};

// Per-patch matrix of fitted values for one distribution parameter. Cells where
// fitting failed are flagged invalid and ignored by all consumers.
struct ParameterMap {
    std::string family;     // distribution-family tag, e.g. "gamma"
    std::string param_name; // e.g. "k", "theta"
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    static ParameterMap make(std::string family, std::string param_name, int rows, int cols) {
        ParameterMap m;
        m.family = std::move(family);
        m.param_name = std::move(param_name);
        m.rows = rows;
        m.cols = cols;
        m.values.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        m.valid.assign(static_cast<std::size_t>(rows) * cols, 0);
        return m;
    }

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    bool is_valid(int r, int c) const { return valid[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, double v) {
        values[static_cast<std::size_t>(r) * cols + c] = v;
        valid[static_cast<std::size_t>(r) * cols + c] = 1;
    }
    void set_invalid(int r, int c) {
        values[static_cast<std::size_t>(r) * cols + c] = 0.0;
        valid[static_cast<std::size_t>(r) * cols + c] = 0;
    }
};

} // namespace specstat::core
