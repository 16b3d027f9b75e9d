#include "rawburst/io/formats.hpp"

#include "rawburst/util/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rawburst::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("write failed for " + path.string());
}

namespace {

// Netpbm-style header tokenizer: whitespace separated, '#' comments.
class HeaderReader {
public:
    explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

    std::string token() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) throw ValidationError("truncated image header");
        return bytes_.substr(start, pos_ - start);
    }

    long integer() {
        const std::string t = token();
        try {
            std::size_t used = 0;
            const long v = std::stol(t, &used);
            if (used != t.size()) throw ValidationError("bad integer '" + t + "' in header");
            return v;
        } catch (const std::logic_error&) {
            throw ValidationError("bad integer '" + t + "' in header");
        }
    }

    // Exactly one whitespace byte separates the header from the payload.
    std::size_t payload_start() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            throw ValidationError("malformed image header");
        return pos_ + 1;
    }

private:
    void skip_space() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_pfm(const Image& img) {
    require(img.channels() == 1 || img.channels() == 3, "PFM: 1 or 3 channels required");
    require(all_finite(img), "PFM: refusing to write non-finite values");
    std::string out = (img.channels() == 3 ? "PF\n" : "Pf\n") + std::to_string(img.width()) + " " +
                      std::to_string(img.height()) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + img.size() * 4);
    char* dst = out.data() + header;
    for (int y = img.height() - 1; y >= 0; --y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) {
                const float f = static_cast<float>(img(y, x, c));
                std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
                for (int b = 0; b < 4; ++b) *dst++ = static_cast<char>((bits >> (8 * b)) & 0xff);
            }
    return out;
}

Image decode_pfm(const std::string& bytes) {
    HeaderReader hr(bytes);
    const std::string magic = hr.token();
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw ValidationError("PFM: bad magic '" + magic + "'");
    const long w = hr.integer(), h = hr.integer();
    const std::string scale_tok = hr.token();
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::logic_error&) {
        throw ValidationError("PFM: bad scale '" + scale_tok + "'");
    }
    require(w > 0 && h > 0 && w < 65536 && h < 65536, "PFM: bad dimensions");
    require(scale != 0.0, "PFM: zero scale");
    const bool little = scale < 0.0;
    const std::size_t start = hr.payload_start();
    const std::size_t need = static_cast<std::size_t>(w) * h * channels * 4;
    require(bytes.size() >= start + need, "PFM: truncated payload");
    Image img(static_cast<int>(h), static_cast<int>(w), channels);
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data() + start);
    for (int y = img.height() - 1; y >= 0; --y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < channels; ++c) {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) {
                    const int shift = little ? 8 * b : 8 * (3 - b);
                    bits |= static_cast<std::uint32_t>(src[b]) << shift;
                }
                src += 4;
                img(y, x, c) = std::bit_cast<float>(bits);
            }
    return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) { write_file(path, encode_pfm(img)); }
Image read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

std::string encode_pgm16(const DnImage& img, int bit_depth) {
    require(bit_depth >= 8 && bit_depth <= 16, "PGM: bit depth must be in [8, 16]");
    const int maxval = (1 << bit_depth) - 1;
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                      std::to_string(maxval) + "\n";
    // Netpbm stores one byte per sample when maxval < 256, two big-endian bytes otherwise.
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    const std::size_t header = out.size();
    out.resize(header + img.data.size() * bytes_per);
    char* dst = out.data() + header;
    for (std::uint16_t v : img.data) {
        require(v <= maxval, "PGM: sample exceeds maxval");
        if (bytes_per == 2) *dst++ = static_cast<char>(v >> 8);
        *dst++ = static_cast<char>(v & 0xff);
    }
    return out;
}

DnImage decode_pgm16(const std::string& bytes, int bit_depth) {
    HeaderReader hr(bytes);
    require(hr.token() == "P5", "PGM: expected binary P5 magic");
    const long w = hr.integer(), h = hr.integer(), maxval = hr.integer();
    require(w > 0 && h > 0 && w < 65536 && h < 65536, "PGM: bad dimensions");
    const long expected = (1L << bit_depth) - 1;
    if (maxval != expected)
        throw ValidationError("PGM: maxval " + std::to_string(maxval) + " does not match bit depth " +
                              std::to_string(bit_depth));
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    const std::size_t start = hr.payload_start();
    const std::size_t n = static_cast<std::size_t>(w) * h;
    require(bytes.size() >= start + bytes_per * n, "PGM: truncated payload");
    DnImage img{static_cast<int>(h), static_cast<int>(w), std::vector<std::uint16_t>(n)};
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data() + start);
    for (std::size_t i = 0; i < n; ++i) {
        img.data[i] = bytes_per == 2 ? static_cast<std::uint16_t>((src[2 * i] << 8) | src[2 * i + 1]) : src[i];
        require(img.data[i] <= maxval, "PGM: sample exceeds maxval");
    }
    return img;
}

void write_pgm16(const std::filesystem::path& path, const DnImage& img, int bit_depth) {
    write_file(path, encode_pgm16(img, bit_depth));
}

DnImage read_pgm16(const std::filesystem::path& path, int bit_depth) {
    return decode_pgm16(read_file(path), bit_depth);
}

void write_ppm8(const std::filesystem::path& path, const Image& rgb) {
    require(rgb.channels() == 3, "PPM: 3 channels required");
    std::string out = "P6\n" + std::to_string(rgb.width()) + " " + std::to_string(rgb.height()) + "\n255\n";
    for (double v : rgb.values()) out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    write_file(path, out);
}

} // namespace rawburst::io
