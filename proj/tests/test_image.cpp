#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <png.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "slicereg/bspline.hpp"
#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"
#include "slicereg/image_io.hpp"
#include "slicereg/rng.hpp"

using namespace slicereg;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    const fs::path d = fs::temp_directory_path() / "slicereg_test_image";
    fs::create_directories(d);
    return d;
}

ScalarImage noise_image(int w, int h, uint64_t seed) {
    ScalarImage img(w, h);
    Rng rng(seed);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

// fixture writer for formats save_png does not produce (color, 16-bit)
void write_png_fixture(const fs::path& path, int w, int h, int bit_depth, int channels,
                       const std::vector<uint16_t>& samples) {
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, w, h, bit_depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    std::vector<uint8_t> row(static_cast<size_t>(w) * channels * (bit_depth / 8));
    for (int y = 0; y < h; ++y) {
        for (int i = 0; i < w * channels; ++i) {
            const uint16_t s = samples[static_cast<size_t>(y) * w * channels + i];
            if (bit_depth == 8)
                row[i] = static_cast<uint8_t>(s);
            else
                std::memcpy(&row[2 * i], &s, 2);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// minimal TIFF builder mirroring the baseline layout the loader supports
struct TiffBuilder {
    std::vector<uint8_t> bytes;
    bool little = true;

    void u16(uint16_t v) {
        if (little) {
            bytes.push_back(v & 0xff);
            bytes.push_back(v >> 8);
        } else {
            bytes.push_back(v >> 8);
            bytes.push_back(v & 0xff);
        }
    }
    void u32(uint32_t v) {
        if (little) {
            for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
        } else {
            for (int i = 3; i >= 0; --i) bytes.push_back((v >> (8 * i)) & 0xff);
        }
    }
    void entry(uint16_t tag, uint16_t type, uint32_t count, uint32_t value) {
        u16(tag);
        u16(type);
        u32(count);
        // values shorter than 4 bytes sit left-justified in the value slot
        if (type == 3 && count == 1) {
            u16(static_cast<uint16_t>(value));
            u16(0);
        } else {
            u32(value);
        }
    }
};

// gray or RGB, 8 or 16 bit, one strip; samples are raw channel values
void write_tiff_fixture(const fs::path& path, int w, int h, int bits, int spp, bool little,
                        uint32_t photometric, const std::vector<uint16_t>& samples) {
    TiffBuilder b;
    b.little = little;
    b.bytes.reserve(256);
    if (little)
        b.bytes.insert(b.bytes.end(), {'I', 'I'});
    else
        b.bytes.insert(b.bytes.end(), {'M', 'M'});
    b.u16(42);
    const uint32_t data_bytes = static_cast<uint32_t>(w) * h * spp * (bits / 8);
    b.u32(8 + data_bytes);  // IFD after the pixel data
    for (uint16_t s : samples) {
        if (bits == 8)
            b.bytes.push_back(static_cast<uint8_t>(s));
        else
            b.u16(s);
    }
    b.u16(9);
    b.entry(256, 4, 1, static_cast<uint32_t>(w));
    b.entry(257, 4, 1, static_cast<uint32_t>(h));
    b.entry(258, 3, 1, static_cast<uint32_t>(bits));
    b.entry(259, 3, 1, 1);
    b.entry(262, 3, 1, photometric);
    b.entry(273, 4, 1, 8);
    b.entry(277, 3, 1, static_cast<uint32_t>(spp));
    b.entry(278, 4, 1, static_cast<uint32_t>(h));
    b.entry(279, 4, 1, data_bytes);
    b.u32(0);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.bytes.data()),
              static_cast<std::streamsize>(b.bytes.size()));
}

}  // namespace

TEST_CASE("scalar image indexing is row-major") {
    ScalarImage img(3, 2);
    img.at(2, 1) = 0.25;
    CHECK(img.pixels[1 * 3 + 2] == 0.25);
    CHECK(img.size() == 6);
}

TEST_CASE("bilinear sampling hits stored values on the integer lattice") {
    ScalarImage img = noise_image(8, 6, 11);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(sample_bilinear(img, x, y) == doctest::Approx(img.at(x, y)).epsilon(1e-15));
}

TEST_CASE("bilinear midpoint of a 2x2 checker is the average") {
    ScalarImage img(2, 2);
    img.at(0, 0) = 0.0;
    img.at(1, 0) = 1.0;
    img.at(0, 1) = 0.0;
    img.at(1, 1) = 1.0;
    CHECK(sample_bilinear(img, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("far out-of-bounds samples return the fill value") {
    ScalarImage img = noise_image(8, 8, 3);
    CHECK(sample_bilinear(img, -10.0, -10.0, 0.0) == 0.0);
    CHECK(sample_bilinear(img, 100.0, 4.0, 0.25) == 0.25);
    double gx = 1.0, gy = 1.0;
    CHECK(sample_bilinear_grad(img, -10.0, -10.0, 0.5, &gx, &gy) == 0.5);
    CHECK(gx == 0.0);
    CHECK(gy == 0.0);
}

TEST_CASE("bilinear sampling is continuous across the image border") {
    // the interpolant must blend into the fill value over a one-pixel apron;
    // a hard cutoff at the edge would make warp-based losses discontinuous
    ScalarImage img = noise_image(8, 8, 5);
    const double fill = 0.0;
    const double eps = 1e-9;
    for (double y : {0.3, 3.7, 6.9}) {
        for (double xedge : {0.0, 7.0, -1.0, 8.0}) {
            const double lo = sample_bilinear(img, xedge - eps, y, fill);
            const double hi = sample_bilinear(img, xedge + eps, y, fill);
            CHECK(std::fabs(hi - lo) < 1e-6);
        }
    }
    // mid-apron value blends pixel column 0 with fill
    const double v = sample_bilinear(img, -0.5, 2.0, fill);
    CHECK(v == doctest::Approx(0.5 * img.at(0, 2) + 0.5 * fill).epsilon(1e-12));
}

TEST_CASE("bilinear sampling is Lipschitz along axes") {
    ScalarImage img = noise_image(16, 16, 21);
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = rng.uniform(0.0, 14.0);
        const double y = rng.uniform(0.0, 15.0);
        const double delta = rng.uniform(0.0, 1.0);
        double max_adj = 0.0;
        for (int yy = 0; yy < 16; ++yy)
            for (int xx = 0; xx + 1 < 16; ++xx)
                max_adj = std::max(max_adj, std::fabs(img.at(xx + 1, yy) - img.at(xx, yy)));
        const double jump = std::fabs(sample_bilinear(img, x + delta, y) - sample_bilinear(img, x, y));
        CHECK(jump <= delta * max_adj + 1e-12);
    }
}

TEST_CASE("bilinear gradients match finite differences") {
    ScalarImage img = noise_image(12, 12, 9);
    Rng rng(13);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const double x = rng.uniform(1.0, 10.0);
        const double y = rng.uniform(1.0, 10.0);
        double gx = 0.0, gy = 0.0;
        const double v = sample_bilinear_grad(img, x, y, 0.0, &gx, &gy);
        CHECK(v == doctest::Approx(sample_bilinear(img, x, y)).epsilon(1e-14));
        const double fx = (sample_bilinear(img, x + h, y) - sample_bilinear(img, x - h, y)) / (2 * h);
        const double fy = (sample_bilinear(img, x, y + h) - sample_bilinear(img, x, y - h)) / (2 * h);
        CHECK(gx == doctest::Approx(fx).epsilon(1e-6));
        CHECK(gy == doctest::Approx(fy).epsilon(1e-6));
    }
}

TEST_CASE("identity warp reproduces the image exactly") {
    ScalarImage img = noise_image(20, 15, 2);
    ScalarImage out = warp(img, IdentityMap(), 20, 15);
    REQUIRE(out.width == 20);
    REQUIRE(out.height == 15);
    for (size_t i = 0; i < img.size(); ++i) CHECK(out.pixels[i] == img.pixels[i]);
}

TEST_CASE("translation map shifts content the backward way") {
    // map (+3,0) means output(x) = input(x+3): content moves left, fill enters
    // at the right border
    ScalarImage img = noise_image(10, 4, 6);
    ScalarImage out = warp(img, AffineMap(AffineTransform2D::translation(3.0, 0.0)), 10, 4, 0.0);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 7; ++x) CHECK(out.at(x, y) == doctest::Approx(img.at(x + 3, y)));
        for (int x = 8; x < 10; ++x) CHECK(out.at(x, y) == 0.0);
    }
}

TEST_CASE("warping through a field and then its inverse is near-identity") {
    ScalarImage img = noise_image(64, 64, 31);
    // smooth it so interpolation error is meaningful
    ScalarImage smooth = img;
    for (int pass = 0; pass < 2; ++pass) {
        ScalarImage next = smooth;
        for (int y = 1; y < 63; ++y)
            for (int x = 1; x < 63; ++x)
                next.at(x, y) = 0.25 * smooth.at(x, y) +
                                0.1875 * (smooth.at(x - 1, y) + smooth.at(x + 1, y) +
                                          smooth.at(x, y - 1) + smooth.at(x, y + 1));
        smooth = next;
    }
    BSplineField field = make_field_covering(64, 64, 16.0);
    Rng rng(8);
    for (double& c : field.coeffs) c = rng.uniform(-2.0, 2.0);

    ScalarImage once = warp(smooth, BSplineMap(field), 64, 64);
    ScalarImage back = warp(once, BSplineInverseMap(field), 64, 64);

    double sum = 0.0;
    long cnt = 0;
    for (int y = 8; y < 56; ++y) {
        for (int x = 8; x < 56; ++x) {
            sum += std::fabs(back.at(x, y) - smooth.at(x, y));
            ++cnt;
        }
    }
    CHECK(sum / cnt < 0.02);
}

TEST_CASE("composed affine warp equals sequential warps on the interior") {
    ScalarImage img = noise_image(48, 48, 17);
    for (int pass = 0; pass < 3; ++pass) {  // interpolation tolerance assumes smooth content
        ScalarImage next = img;
        for (int y = 1; y < 47; ++y)
            for (int x = 1; x < 47; ++x)
                next.at(x, y) =
                    0.25 * img.at(x, y) + 0.1875 * (img.at(x - 1, y) + img.at(x + 1, y) +
                                                    img.at(x, y - 1) + img.at(x, y + 1));
        img = next;
    }
    const AffineTransform2D a = AffineTransform2D::rotation_about(4.0, {23.5, 23.5}, {23.5, 23.5});
    const AffineTransform2D b = AffineTransform2D::translation(1.3, -0.7);
    // backward mapping composes in application order: sampling through a then b
    // equals sampling through compose(b, a)
    ScalarImage two = warp(warp(img, AffineMap(b), 48, 48), AffineMap(a), 48, 48);
    ScalarImage one = warp(img, AffineMap(compose(b, a)), 48, 48);
    double sum = 0.0;
    long cnt = 0;
    for (int y = 4; y < 44; ++y) {
        for (int x = 4; x < 44; ++x) {
            sum += std::fabs(two.at(x, y) - one.at(x, y));
            ++cnt;
        }
    }
    CHECK(sum / cnt < 0.02);
}

TEST_CASE("downsample block means and edge handling") {
    SUBCASE("factor 1 is the identity") {
        ScalarImage img = noise_image(7, 5, 1);
        ScalarImage out = downsample(img, 1);
        REQUIRE(out.width == 7);
        for (size_t i = 0; i < img.size(); ++i) CHECK(out.pixels[i] == img.pixels[i]);
    }
    SUBCASE("2x2 checker averages to 0.5") {
        ScalarImage img(2, 2);
        img.at(0, 0) = 0.0;
        img.at(1, 0) = 1.0;
        img.at(0, 1) = 0.0;
        img.at(1, 1) = 1.0;
        ScalarImage out = downsample(img, 2);
        REQUIRE(out.width == 1);
        REQUIRE(out.height == 1);
        CHECK(out.at(0, 0) == doctest::Approx(0.5));
    }
    SUBCASE("constant image with partial border blocks stays constant") {
        ScalarImage img(5, 5, 0.3);
        ScalarImage out = downsample(img, 2);
        REQUIRE(out.width == 3);
        REQUIRE(out.height == 3);
        for (double v : out.pixels) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("global mean is preserved when the factor divides both dims") {
        ScalarImage img = noise_image(24, 16, 41);
        ScalarImage out = downsample(img, 4);
        double m_in = 0.0, m_out = 0.0;
        for (double v : img.pixels) m_in += v;
        for (double v : out.pixels) m_out += v;
        CHECK(m_in / img.size() == doctest::Approx(m_out / out.size()).epsilon(1e-12));
    }
    SUBCASE("factor 0 is rejected") {
        ScalarImage img(4, 4, 0.5);
        CHECK_THROWS(downsample(img, 0));
    }
}

TEST_CASE("quantize8 rounds half up and clamps") {
    CHECK(quantize8(0.0) == 0);
    CHECK(quantize8(1.0) == 255);
    CHECK(quantize8(-0.2) == 0);
    CHECK(quantize8(1.7) == 255);
    CHECK(quantize8(0.5 / 255.0) == 1);          // exactly half rounds up
    CHECK(quantize8(0.49 / 255.0) == 0);
    CHECK(quantize8(254.5 / 255.0) == 255);
}

TEST_CASE("png round trip through save and load") {
    const fs::path p = test_dir() / "roundtrip.png";
    ScalarImage img = noise_image(9, 7, 55);
    save_png(img, p.string());
    ScalarImage back = load_image(p.string());
    REQUIRE(back.width == 9);
    REQUIRE(back.height == 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
            CHECK(back.at(x, y) == doctest::Approx(quantize8(img.at(x, y)) / 255.0).epsilon(1e-12));
}

TEST_CASE("white 8-bit png loads as all ones") {
    const fs::path p = test_dir() / "white.png";
    std::vector<uint16_t> samples(4 * 3, 255);
    write_png_fixture(p, 4, 3, 8, 1, samples);
    ScalarImage img = load_image(p.string());
    for (double v : img.pixels) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rgb png reduces to luminance") {
    const fs::path p = test_dir() / "rgb.png";
    // one red, one green, one blue pixel
    std::vector<uint16_t> samples = {255, 0, 0, 0, 255, 0, 0, 0, 255};
    write_png_fixture(p, 3, 1, 8, 3, samples);
    ScalarImage img = load_image(p.string());
    CHECK(img.at(0, 0) == doctest::Approx(0.299).epsilon(1e-9));
    CHECK(img.at(1, 0) == doctest::Approx(0.587).epsilon(1e-9));
    CHECK(img.at(2, 0) == doctest::Approx(0.114).epsilon(1e-9));
}

TEST_CASE("16-bit png normalizes by 65535") {
    const fs::path p = test_dir() / "deep.png";
    std::vector<uint16_t> samples = {32768, 0, 65535, 1};
    write_png_fixture(p, 2, 2, 16, 1, samples);
    ScalarImage img = load_image(p.string());
    CHECK(img.at(0, 0) == doctest::Approx(32768.0 / 65535.0).epsilon(1e-12));
    CHECK(img.at(1, 0) == doctest::Approx(0.0));
    CHECK(img.at(0, 1) == doctest::Approx(1.0));
    CHECK(img.at(1, 1) == doctest::Approx(1.0 / 65535.0).epsilon(1e-9));
}

TEST_CASE("tiff writer output loads back bit-exact") {
    const fs::path p = test_dir() / "gray.tif";
    ScalarImage img = noise_image(6, 5, 77);
    save_tiff_gray8(img, p.string());
    ScalarImage back = load_image(p.string());
    REQUIRE(back.width == 6);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
            CHECK(back.at(x, y) == doctest::Approx(quantize8(img.at(x, y)) / 255.0).epsilon(1e-12));
}

TEST_CASE("tiff variants: rgb, 16-bit, big-endian, inverted photometric") {
    const fs::path dir = test_dir();
    SUBCASE("rgb 8-bit luminance") {
        write_tiff_fixture(dir / "rgb.tif", 1, 1, 8, 3, true, 2, {255, 0, 0});
        ScalarImage img = load_image((dir / "rgb.tif").string());
        CHECK(img.at(0, 0) == doctest::Approx(0.299).epsilon(1e-9));
    }
    SUBCASE("16-bit gray") {
        write_tiff_fixture(dir / "deep.tif", 2, 1, 16, 1, true, 1, {32768, 65535});
        ScalarImage img = load_image((dir / "deep.tif").string());
        CHECK(img.at(0, 0) == doctest::Approx(32768.0 / 65535.0).epsilon(1e-12));
        CHECK(img.at(1, 0) == doctest::Approx(1.0));
    }
    SUBCASE("big-endian byte order") {
        write_tiff_fixture(dir / "be.tif", 2, 1, 16, 1, false, 1, {4096, 512});
        ScalarImage img = load_image((dir / "be.tif").string());
        CHECK(img.at(0, 0) == doctest::Approx(4096.0 / 65535.0).epsilon(1e-12));
        CHECK(img.at(1, 0) == doctest::Approx(512.0 / 65535.0).epsilon(1e-12));
    }
    SUBCASE("white-is-zero photometric flips intensities") {
        write_tiff_fixture(dir / "wiz.tif", 1, 1, 8, 1, true, 0, {0});
        ScalarImage img = load_image((dir / "wiz.tif").string());
        CHECK(img.at(0, 0) == doctest::Approx(1.0));
    }
}

TEST_CASE("loader error handling") {
    const fs::path dir = test_dir();
    SUBCASE("missing file") { CHECK_THROWS(load_image((dir / "nope.png").string())); }
    SUBCASE("unknown magic") {
        std::ofstream((dir / "junk.bin").string()) << "not an image at all";
        CHECK_THROWS_WITH_AS(load_image((dir / "junk.bin").string()),
                             doctest::Contains("unsupported raster format"), std::runtime_error);
    }
    SUBCASE("truncated png") {
        std::ofstream out((dir / "trunc.png").string(), std::ios::binary);
        const uint8_t magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
        out.write(reinterpret_cast<const char*>(magic), 8);
        out.close();
        CHECK_THROWS(load_image((dir / "trunc.png").string()));
    }
    SUBCASE("zero-width tiff") {
        write_tiff_fixture(dir / "zero.tif", 0, 1, 8, 1, true, 1, {});
        CHECK_THROWS_WITH_AS(load_image((dir / "zero.tif").string()),
                             doctest::Contains("zero-sized"), std::runtime_error);
    }
    SUBCASE("tiff strip pointing past the end") {
        // valid header but the strip offset exceeds the file size
        TiffBuilder b;
        b.bytes = {'I', 'I'};
        b.u16(42);
        b.u32(8);
        b.u16(8);
        b.entry(256, 4, 1, 4);
        b.entry(257, 4, 1, 4);
        b.entry(258, 3, 1, 8);
        b.entry(259, 3, 1, 1);
        b.entry(262, 3, 1, 1);
        b.entry(273, 4, 1, 100000);
        b.entry(278, 4, 1, 4);
        b.entry(279, 4, 1, 16);
        b.u32(0);
        std::ofstream out((dir / "bado.tif").string(), std::ios::binary);
        out.write(reinterpret_cast<const char*>(b.bytes.data()),
                  static_cast<std::streamsize>(b.bytes.size()));
        out.close();
        CHECK_THROWS(load_image((dir / "bado.tif").string()));
    }
}
