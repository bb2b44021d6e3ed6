#include "specstat/core/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace specstat::core {

std::string to_string(ClassId c) {
    switch (c) {
    case ClassId::Background: return "background";
    case ClassId::ILM: return "ilm";
    case ClassId::RPE: return "rpe";
    case ClassId::Tool: return "tool";
    }
    fail("InvalidClass", "unknown class id");
}

ClassId class_from_string(const std::string& s) {
    if (s == "background") return ClassId::Background;
    if (s == "ilm") return ClassId::ILM;
    if (s == "rpe") return ClassId::RPE;
    if (s == "tool") return ClassId::Tool;
    fail("InvalidClass", "unknown class name: " + s);
}

namespace {

// Reads the next whitespace-delimited token, skipping '#' comment lines as the
// PGM format allows between header fields.
std::string next_header_token(std::istream& in) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n')
                ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    require(ch != EOF, "MalformedHeader", "unexpected end of file in PGM header");
    std::string tok;
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    return tok;
}

int parse_header_int(const std::string& tok) {
    require(!tok.empty() && tok.find_first_not_of("0123456789") == std::string::npos,
            "MalformedHeader", "non-numeric PGM header field: " + tok);
    return std::stoi(tok);
}

} // namespace

BScan load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "IoFailure", "cannot open " + path.string());

    char magic[2] = {0, 0};
    in.read(magic, 2);
    require(in.gcount() == 2 && magic[0] == 'P' && magic[1] == '5', "MalformedHeader",
            "not a binary PGM (expected magic P5): " + path.string());

    int width = parse_header_int(next_header_token(in));
    int height = parse_header_int(next_header_token(in));
    int maxval = parse_header_int(next_header_token(in));
    require(width > 0 && height > 0, "MalformedHeader", "non-positive PGM dimensions");
    require(maxval == 255 || maxval == 65535, "UnsupportedMaxval",
            "PGM maxval must be 255 or 65535, got " + std::to_string(maxval));
    // exactly one whitespace byte separates the header from the payload; it was
    // already consumed by the tokenizer.

    BScan scan;
    scan.height = height;
    scan.width = width;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    scan.pixels.resize(n);

    if (maxval == 255) {
        std::vector<std::uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        require(static_cast<std::size_t>(in.gcount()) == n, "TruncatedPayload",
                "PGM payload shorter than width*height");
        for (std::size_t i = 0; i < n; ++i)
            scan.pixels[i] = buf[i];
    } else {
        std::vector<std::uint8_t> buf(2 * n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
        require(static_cast<std::size_t>(in.gcount()) == 2 * n, "TruncatedPayload",
                "PGM payload shorter than 2*width*height");
        for (std::size_t i = 0; i < n; ++i)
            scan.pixels[i] = (buf[2 * i] << 8) | buf[2 * i + 1]; // big-endian
    }
    return scan;
}

namespace {

void write_pgm_header(std::ofstream& out, int width, int height, int maxval) {
    out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
}

} // namespace

void save_pgm(const BScan& scan, const std::filesystem::path& path, int maxval) {
    require(maxval == 255 || maxval == 65535, "UnsupportedMaxval",
            "PGM maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "IoFailure", "cannot open " + path.string() + " for writing");
    write_pgm_header(out, scan.width, scan.height, maxval);

    const std::size_t n = scan.pixels.size();
    if (maxval == 255) {
        std::vector<std::uint8_t> buf(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = std::round(scan.pixels[i]);
            buf[i] = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n));
    } else {
        std::vector<std::uint8_t> buf(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = std::round(scan.pixels[i]);
            auto q = static_cast<std::uint16_t>(std::min(65535.0, std::max(0.0, v)));
            buf[2 * i] = static_cast<std::uint8_t>(q >> 8);
            buf[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(2 * n));
    }
    require(out.good(), "IoFailure", "write failed: " + path.string());
}

void save_label_pgm(const LabelMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "IoFailure", "cannot open " + path.string() + " for writing");
    write_pgm_header(out, map.width, map.height, 255);
    std::vector<std::uint8_t> buf(map.mask.size());
    for (std::size_t i = 0; i < map.mask.size(); ++i)
        buf[i] = map.mask[i] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(out.good(), "IoFailure", "write failed: " + path.string());
}

LabelMap load_label_pgm(const std::filesystem::path& path, ClassId cls) {
    BScan img = load_pgm(path);
    LabelMap map = LabelMap::empty(cls, img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        map.mask[i] = img.pixels[i] >= 128.0 ? 1 : 0;
    return map;
}

void save_param_csv(const ParameterMap& map, const std::filesystem::path& path) {
    require(map.values.size() == static_cast<std::size_t>(map.rows) * map.cols &&
                map.valid.size() == map.values.size(),
            "DimensionMismatch", "parameter map buffers do not match rows*cols");
    std::ofstream out(path);
    require(out.good(), "IoFailure", "cannot open " + path.string() + " for writing");
    out << map.family << "," << map.param_name << "," << map.rows << "," << map.cols << "\n";
    char num[64];
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (c)
                out << ",";
            if (!map.is_valid(r, c)) {
                out << "nan";
            } else {
                std::snprintf(num, sizeof(num), "%.17g", map.at(r, c));
                out << num;
            }
        }
        out << "\n";
    }
    require(out.good(), "IoFailure", "write failed: " + path.string());
}

ParameterMap load_param_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "IoFailure", "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "MalformedHeader",
            "empty parameter CSV: " + path.string());

    std::stringstream header(line);
    std::string family, param, rows_s, cols_s;
    require(std::getline(header, family, ',') && std::getline(header, param, ',') &&
                std::getline(header, rows_s, ',') && std::getline(header, cols_s, ','),
            "MalformedHeader", "parameter CSV header needs family,param_name,rows,cols");
    int rows = parse_header_int(rows_s);
    int cols = parse_header_int(cols_s);

    ParameterMap map = ParameterMap::make(family, param, rows, cols);
    std::size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            require(count < map.values.size(), "DimensionMismatch",
                    "parameter CSV body larger than rows*cols");
            if (cell == "nan") {
                map.values[count] = 0.0;
                map.valid[count] = 0;
            } else {
                map.values[count] = std::stod(cell);
                map.valid[count] = 1;
            }
            ++count;
        }
    }
    require(count == map.values.size(), "DimensionMismatch",
            "parameter CSV body smaller than rows*cols");
    return map;
}

void save_prob_pgm(const std::vector<double>& probs, int height, int width,
                   const std::filesystem::path& path) {
    require(probs.size() == static_cast<std::size_t>(height) * width, "DimensionMismatch",
            "probability buffer does not match dimensions");
    BScan img;
    img.height = height;
    img.width = width;
    img.pixels.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        img.pixels[i] = probs[i] * 65535.0;
    save_pgm(img, path, 65535);
}

} // namespace specstat::core
