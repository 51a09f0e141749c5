#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <png.h>

#include "mammo_eval/fs_util.hpp"
#include "mammo_eval/image.hpp"

namespace mammo {

namespace detail {

struct PngReadState {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + len > st->size) png_error(png, "truncated PNG");
    std::memcpy(out, st->data + st->pos, len);
    st->pos += len;
}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

inline void png_flush_noop(png_structp) {}

inline bool has_png_signature(const std::string& bytes) {
    return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

inline RasterImage decode_png(const std::string& bytes, const std::string& name) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::IoFailure, "libpng init failed");
    }
    std::vector<std::uint16_t> samples;
    png_uint_32 w = 0, h = 0;
    int depth = 8;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::IoFailure, "corrupt PNG " + name);
    }
    PngReadState st{reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size(), 0};
    png_set_read_fn(png, &st, png_read_from_memory);
    png_read_info(png, info);
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color_type & PNG_COLOR_MASK_COLOR || color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (bit_depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    depth = bit_depth == 16 ? 16 : 8;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> buf(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    samples.resize(static_cast<std::size_t>(w) * h);
    for (png_uint_32 y = 0; y < h; ++y) {
        for (png_uint_32 x = 0; x < w; ++x) {
            if (depth == 16) {
                std::uint16_t v;
                std::memcpy(&v, rows[y] + 2 * x, 2);
                samples[y * w + x] = v;
            } else {
                samples[y * w + x] = rows[y][x];
            }
        }
    }
    return RasterImage(static_cast<int>(w), static_cast<int>(h), depth, std::move(samples));
}

/// color_type is PNG_COLOR_TYPE_GRAY or PNG_COLOR_TYPE_RGB; `rows` are packed
/// native-endian samples.
inline std::vector<std::uint8_t> encode_png_rows(int width, int height, int bit_depth, int color_type,
                                                 const std::vector<std::uint8_t>& packed) {
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::IoFailure, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::IoFailure, "PNG encoding failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_compression_level(png, 3);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(y) * rowbytes);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline RasterImage decode_pgm(const std::string& bytes, const std::string& name) {
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    if (next_token() != "P5") fail(ErrorCode::IoFailure, name + " is not a binary PGM");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        fail(ErrorCode::IoFailure, "malformed PGM header in " + name);
    }
    ++pos;  // single whitespace before raster
    const int bpp = maxval > 255 ? 2 : 1;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() < pos + n * bpp) fail(ErrorCode::IoFailure, "truncated PGM " + name);
    std::vector<std::uint16_t> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (bpp == 2) {
            const auto hi = static_cast<std::uint8_t>(bytes[pos + 2 * i]);
            const auto lo = static_cast<std::uint8_t>(bytes[pos + 2 * i + 1]);
            samples[i] = static_cast<std::uint16_t>((hi << 8) | lo);
        } else {
            samples[i] = static_cast<std::uint8_t>(bytes[pos + i]);
        }
    }
    return RasterImage(w, h, bpp == 2 ? 16 : 8, std::move(samples));
}

}  // namespace detail

inline RasterImage read_image(const fs::path& path) {
    const std::string bytes = read_text_file(path);
    if (detail::has_png_signature(bytes)) return detail::decode_png(bytes, path.string());
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return detail::decode_pgm(bytes, path.string());
    fail(ErrorCode::IoFailure, "unsupported image format: " + path.string());
}

/// Dimensions from the file header only (PNG IHDR or PGM header).
inline std::pair<int, int> read_image_size(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open image " + path.string());
    std::string head(64, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    if (detail::has_png_signature(head) && head.size() >= 24) {
        auto be32 = [&](std::size_t off) {
            return (static_cast<std::uint32_t>(static_cast<std::uint8_t>(head[off])) << 24) |
                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(head[off + 1])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(head[off + 2])) << 8) |
                   static_cast<std::uint32_t>(static_cast<std::uint8_t>(head[off + 3]));
        };
        return {static_cast<int>(be32(16)), static_cast<int>(be32(20))};
    }
    if (head.size() >= 2 && head[0] == 'P' && head[1] == '5') {
        const auto img = detail::decode_pgm(read_text_file(path), path.string());
        return {img.width(), img.height()};
    }
    fail(ErrorCode::IoFailure, "unsupported image format: " + path.string());
}

inline std::vector<std::uint8_t> encode_png(const RasterImage& img) {
    const int bpp = img.depth() == 16 ? 2 : 1;
    std::vector<std::uint8_t> packed(img.size() * bpp);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (bpp == 2)
            std::memcpy(packed.data() + 2 * i, &img.samples()[i], 2);
        else
            packed[i] = static_cast<std::uint8_t>(img.samples()[i]);
    }
    return detail::encode_png_rows(img.width(), img.height(), img.depth(), PNG_COLOR_TYPE_GRAY, packed);
}

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    std::vector<std::uint8_t> packed(img.pixels().size() * 3);
    for (std::size_t i = 0; i < img.pixels().size(); ++i) {
        packed[3 * i] = img.pixels()[i].r;
        packed[3 * i + 1] = img.pixels()[i].g;
        packed[3 * i + 2] = img.pixels()[i].b;
    }
    return detail::encode_png_rows(img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, packed);
}

inline std::string encode_pgm(const RasterImage& img) {
    std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n" +
                      (img.depth() == 16 ? "65535" : "255") + "\n";
    for (auto s : img.samples()) {
        if (img.depth() == 16) out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(s & 0xff));
    }
    return out;
}

inline void write_png(const fs::path& path, const RasterImage& img) {
    const auto bytes = encode_png(img);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline void write_png(const fs::path& path, const RgbImage& img) {
    const auto bytes = encode_png(img);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline void write_pgm(const fs::path& path, const RasterImage& img) { write_file_atomic(path, encode_pgm(img)); }

inline RasterImage mask_to_image(const BinaryMask& m) {
    std::vector<std::uint16_t> s(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) s[i] = m.at_index(i) ? 255 : 0;
    return RasterImage(m.width(), m.height(), 8, std::move(s));
}

inline BinaryMask image_to_mask(const RasterImage& img) {
    BinaryMask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) m.set_index(i, img.samples()[i] != 0);
    return m;
}

}  // namespace mammo
