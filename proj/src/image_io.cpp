#include "slicereg/image_io.hpp"

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace slicereg {

uint8_t quantize8(double v) {
    double q = std::floor(v * 255.0 + 0.5);
    if (q < 0.0) q = 0.0;
    if (q > 255.0) q = 255.0;
    return static_cast<uint8_t>(q);
}

namespace {

constexpr double kLumR = 0.299;
constexpr double kLumG = 0.587;
constexpr double kLumB = 0.114;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// ---------------------------------------------------------------------------
// PNG via libpng
// ---------------------------------------------------------------------------

ScalarImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("load_image: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("load_image: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: failed to decode PNG " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (width == 0 || height == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: zero-sized image " + path);
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // file is big-endian

    png_read_update_info(png, info);
    bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);

    if ((bit_depth != 8 && bit_depth != 16) || (channels != 1 && channels != 3)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: unsupported bit depth or channel count in " + path);
    }

    const size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<uint8_t> data(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    ScalarImage img(static_cast<int>(width), static_cast<int>(height));
    const double maxval = bit_depth == 8 ? 255.0 : 65535.0;
    for (png_uint_32 y = 0; y < height; ++y) {
        const uint8_t* row = data.data() + y * row_bytes;
        for (png_uint_32 x = 0; x < width; ++x) {
            double v;
            if (bit_depth == 8) {
                const uint8_t* px = row + x * channels;
                v = channels == 1 ? px[0] : kLumR * px[0] + kLumG * px[1] + kLumB * px[2];
            } else {
                const uint16_t* px = reinterpret_cast<const uint16_t*>(row) + x * channels;
                v = channels == 1 ? px[0] : kLumR * px[0] + kLumG * px[1] + kLumB * px[2];
            }
            img.at(static_cast<int>(x), static_cast<int>(y)) = v / maxval;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Minimal baseline TIFF (uncompressed, chunky, gray or RGB, 8/16-bit).
// libtiff is deliberately not required; scanned-section exports in this
// format are simple enough to parse directly.
// ---------------------------------------------------------------------------

struct TiffReader {
    std::vector<uint8_t> bytes;
    bool little = true;

    uint16_t u16(size_t off) const {
        if (off + 2 > bytes.size()) throw std::runtime_error("load_image: truncated TIFF");
        return little ? static_cast<uint16_t>(bytes[off] | bytes[off + 1] << 8)
                      : static_cast<uint16_t>(bytes[off] << 8 | bytes[off + 1]);
    }
    uint32_t u32(size_t off) const {
        if (off + 4 > bytes.size()) throw std::runtime_error("load_image: truncated TIFF");
        return little ? (uint32_t(bytes[off]) | uint32_t(bytes[off + 1]) << 8 |
                         uint32_t(bytes[off + 2]) << 16 | uint32_t(bytes[off + 3]) << 24)
                      : (uint32_t(bytes[off]) << 24 | uint32_t(bytes[off + 1]) << 16 |
                         uint32_t(bytes[off + 2]) << 8 | uint32_t(bytes[off + 3]));
    }
};

struct TiffField {
    uint16_t type = 0;
    uint32_t count = 0;
    size_t value_off = 0;  // offset of the value data within the file
};

uint32_t tiff_value(const TiffReader& t, const TiffField& f, uint32_t index) {
    switch (f.type) {
        case 1: return t.bytes.at(f.value_off + index);       // BYTE
        case 3: return t.u16(f.value_off + 2 * index);        // SHORT
        case 4: return t.u32(f.value_off + 4 * index);        // LONG
        default: throw std::runtime_error("load_image: unsupported TIFF field type");
    }
}

ScalarImage load_tiff(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_image: cannot open " + path);
    TiffReader t;
    t.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (t.bytes.size() < 8) throw std::runtime_error("load_image: truncated TIFF " + path);

    if (t.bytes[0] == 'I' && t.bytes[1] == 'I')
        t.little = true;
    else if (t.bytes[0] == 'M' && t.bytes[1] == 'M')
        t.little = false;
    else
        throw std::runtime_error("load_image: bad TIFF byte-order mark in " + path);
    if (t.u16(2) != 42) throw std::runtime_error("load_image: bad TIFF magic in " + path);

    const uint32_t ifd = t.u32(4);
    const uint16_t nfields = t.u16(ifd);
    std::vector<std::pair<uint16_t, TiffField>> fields;
    for (uint16_t i = 0; i < nfields; ++i) {
        const size_t e = ifd + 2 + 12u * i;
        TiffField f;
        const uint16_t tag = t.u16(e);
        f.type = t.u16(e + 2);
        f.count = t.u32(e + 4);
        const size_t type_size = f.type == 1 ? 1 : f.type == 3 ? 2 : f.type == 4 ? 4 : 0;
        if (type_size == 0) continue;  // skip RATIONAL etc.
        f.value_off = (type_size * f.count <= 4) ? e + 8 : t.u32(e + 8);
        fields.emplace_back(tag, f);
    }
    auto find = [&](uint16_t tag) -> const TiffField* {
        for (const auto& [tg, f] : fields)
            if (tg == tag) return &f;
        return nullptr;
    };
    auto get1 = [&](uint16_t tag, uint32_t fallback, bool required) -> uint32_t {
        const TiffField* f = find(tag);
        if (!f) {
            if (required) throw std::runtime_error("load_image: TIFF missing required tag");
            return fallback;
        }
        return tiff_value(t, *f, 0);
    };

    const uint32_t width = get1(256, 0, true);
    const uint32_t height = get1(257, 0, true);
    if (width == 0 || height == 0) throw std::runtime_error("load_image: zero-sized image " + path);
    const uint32_t compression = get1(259, 1, false);
    if (compression != 1)
        throw std::runtime_error("load_image: only uncompressed TIFF is supported: " + path);
    const uint32_t photometric = get1(262, 1, false);
    const uint32_t spp = get1(277, 1, false);
    if (spp != 1 && spp != 3)
        throw std::runtime_error("load_image: unsupported TIFF channel count in " + path);
    const uint32_t planar = get1(284, 1, false);
    if (planar != 1) throw std::runtime_error("load_image: planar TIFF is not supported: " + path);

    const TiffField* bits_f = find(258);
    uint32_t bits = bits_f ? tiff_value(t, *bits_f, 0) : 1;
    if (bits_f)
        for (uint32_t i = 1; i < bits_f->count; ++i)
            if (tiff_value(t, *bits_f, i) != bits)
                throw std::runtime_error("load_image: mixed TIFF sample sizes in " + path);
    if (bits != 8 && bits != 16)
        throw std::runtime_error("load_image: unsupported TIFF bit depth in " + path);

    const TiffField* offsets = find(273);
    const TiffField* counts = find(279);
    if (!offsets) throw std::runtime_error("load_image: TIFF missing strip offsets in " + path);
    const uint32_t rows_per_strip = get1(278, height, false);

    const size_t bytes_per_px = (bits / 8) * spp;
    std::vector<uint8_t> raster(static_cast<size_t>(width) * height * bytes_per_px);
    uint32_t row = 0;
    for (uint32_t s = 0; s < offsets->count; ++s) {
        const uint32_t off = tiff_value(t, *offsets, s);
        const uint32_t strip_rows = std::min(rows_per_strip, height - row);
        const size_t need = static_cast<size_t>(strip_rows) * width * bytes_per_px;
        if (counts && tiff_value(t, *counts, s) < need)
            throw std::runtime_error("load_image: TIFF strip shorter than expected in " + path);
        if (off + need > t.bytes.size())
            throw std::runtime_error("load_image: truncated TIFF " + path);
        std::memcpy(raster.data() + static_cast<size_t>(row) * width * bytes_per_px,
                    t.bytes.data() + off, need);
        row += strip_rows;
    }
    if (row < height) throw std::runtime_error("load_image: TIFF strip data incomplete in " + path);

    ScalarImage img(static_cast<int>(width), static_cast<int>(height));
    const double maxval = bits == 8 ? 255.0 : 65535.0;
    for (uint32_t y = 0; y < height; ++y) {
        for (uint32_t x = 0; x < width; ++x) {
            const size_t base = (static_cast<size_t>(y) * width + x) * bytes_per_px;
            double chan[3] = {0, 0, 0};
            for (uint32_t c = 0; c < spp; ++c) {
                if (bits == 8)
                    chan[c] = raster[base + c];
                else {
                    const size_t o = base + 2 * c;
                    chan[c] = t.little ? (raster[o] | raster[o + 1] << 8)
                                       : (raster[o] << 8 | raster[o + 1]);
                }
            }
            double v = spp == 1 ? chan[0] : kLumR * chan[0] + kLumG * chan[1] + kLumB * chan[2];
            v /= maxval;
            if (photometric == 0) v = 1.0 - v;  // WhiteIsZero
            img.at(static_cast<int>(x), static_cast<int>(y)) = v;
        }
    }
    return img;
}

}  // namespace

ScalarImage load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("load_image: cannot open " + path);
    uint8_t magic[4] = {0, 0, 0, 0};
    probe.read(reinterpret_cast<char*>(magic), 4);
    probe.close();
    if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
        return load_png(path);
    if ((magic[0] == 'I' && magic[1] == 'I') || (magic[0] == 'M' && magic[1] == 'M'))
        return load_tiff(path);
    throw std::runtime_error("load_image: unsupported raster format in " + path);
}

void save_png(const ScalarImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("save_png: empty image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("save_png: cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("save_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("save_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_png: failed to write " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) row[x] = quantize8(img.at(x, y));
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

void save_tiff_gray8(const ScalarImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("save_tiff_gray8: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_tiff_gray8: cannot open " + path + " for writing");

    const uint32_t npix = static_cast<uint32_t>(img.width) * img.height;
    auto w16 = [&](uint16_t v) { out.put(char(v & 0xff)).put(char(v >> 8)); };
    auto w32 = [&](uint32_t v) {
        out.put(char(v & 0xff)).put(char(v >> 8 & 0xff)).put(char(v >> 16 & 0xff)).put(char(v >> 24));
    };

    // header, pixel data at offset 8, IFD after the data
    out.write("II", 2);
    w16(42);
    w32(8 + npix);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.put(static_cast<char>(quantize8(img.at(x, y))));

    const uint16_t nfields = 8;
    w16(nfields);
    auto entry = [&](uint16_t tag, uint16_t type, uint32_t count, uint32_t value) {
        w16(tag);
        w16(type);
        w32(count);
        w32(value);
    };
    entry(256, 4, 1, static_cast<uint32_t>(img.width));   // ImageWidth
    entry(257, 4, 1, static_cast<uint32_t>(img.height));  // ImageLength
    entry(258, 3, 1, 8);                                  // BitsPerSample
    entry(259, 3, 1, 1);                                  // Compression: none
    entry(262, 3, 1, 1);                                  // Photometric: BlackIsZero
    entry(273, 4, 1, 8);                                  // StripOffsets
    entry(278, 4, 1, static_cast<uint32_t>(img.height));  // RowsPerStrip
    entry(279, 4, 1, npix);                               // StripByteCounts
    w32(0);                                               // no next IFD
}

}  // namespace slicereg
