#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "cct/errors.hpp"
#include "cct/tensor.hpp"

namespace cct {

// Decoded 8-bit image, interleaved row-major. channels is 1 or 3.
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DataError("cannot open file: " + path);
    return f;
}

// libjpeg reports errors through a callback; convert them to exceptions
// via longjmp out of the library.
struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline ImageBuffer decode_png(const std::string& path) {
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: failed to allocate reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png: failed to allocate info");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png: decode failed for " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageBuffer img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = png_get_channels(png, info);
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png: unsupported channel count in " + path);
    }
    img.pixels.resize(img.width * img.height * img.channels);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        rows[y] = img.pixels.data() + y * img.width * img.channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline ImageBuffer decode_jpeg(const std::string& path) {
    auto file = open_file(path, "rb");
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("jpeg: decode failed for " + path + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    ImageBuffer img;
    img.width = cinfo.output_width;
    img.height = cinfo.output_height;
    img.channels = cinfo.output_components;
    img.pixels.resize(img.width * img.height * img.channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.pixels.data() + cinfo.output_scanline * img.width * img.channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

}  // namespace detail

// Decodes PNG or JPEG, picked by file magic.
inline ImageBuffer decode_image(const std::string& path) {
    unsigned char magic[2] = {0, 0};
    {
        auto file = detail::open_file(path, "rb");
        if (std::fread(magic, 1, 2, file.get()) != 2) {
            throw DataError("cannot read image header: " + path);
        }
    }
    if (magic[0] == 0x89 && magic[1] == 'P') return detail::decode_png(path);
    if (magic[0] == 0xFF && magic[1] == 0xD8) return detail::decode_jpeg(path);
    throw DataError("unrecognized image format (not PNG or JPEG): " + path);
}

inline void write_png(const std::string& path, const ImageBuffer& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw UsageError("write_png: channels must be 1 or 3");
    }
    auto file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: failed to allocate writer");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png: failed to allocate info");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png: encode failed for " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() +
                                                 y * img.width * img.channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_jpeg(const std::string& path, const ImageBuffer& img, int quality = 95) {
    if (img.channels != 1 && img.channels != 3) {
        throw UsageError("write_jpeg: channels must be 1 or 3");
    }
    auto file = detail::open_file(path, "wb");
    jpeg_compress_struct cinfo;
    detail::JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = detail::jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw DataError("jpeg: encode failed for " + path + ": " + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file.get());
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = static_cast<int>(img.channels);
    cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(img.pixels.data() +
                                            cinfo.next_scanline * img.width * img.channels);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

// ---------------------------------------------------------------------------
// resize + tensor conversion
// ---------------------------------------------------------------------------

namespace detail {

// Bilinear resample of one plane; sample positions follow the half-pixel
// convention src = (dst + 0.5) * scale - 0.5 with edge clamping.
template <typename T>
std::vector<T> bilinear_plane(const std::vector<T>& src, std::size_t h, std::size_t w,
                              std::size_t th, std::size_t tw) {
    std::vector<T> dst(th * tw);
    const double sy = static_cast<double>(h) / static_cast<double>(th);
    const double sx = static_cast<double>(w) / static_cast<double>(tw);
    auto clamp = [](std::ptrdiff_t v, std::ptrdiff_t hi) {
        return v < 0 ? 0 : (v > hi ? hi : v);
    };
    for (std::size_t y = 0; y < th; ++y) {
        const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(fy));
        const double ty = fy - static_cast<double>(y0);
        const std::size_t ya = clamp(y0, static_cast<std::ptrdiff_t>(h) - 1);
        const std::size_t yb = clamp(y0 + 1, static_cast<std::ptrdiff_t>(h) - 1);
        for (std::size_t x = 0; x < tw; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(fx));
            const double tx = fx - static_cast<double>(x0);
            const std::size_t xa = clamp(x0, static_cast<std::ptrdiff_t>(w) - 1);
            const std::size_t xb = clamp(x0 + 1, static_cast<std::ptrdiff_t>(w) - 1);
            const double top = (1.0 - tx) * src[ya * w + xa] + tx * src[ya * w + xb];
            const double bot = (1.0 - tx) * src[yb * w + xa] + tx * src[yb * w + xb];
            dst[y * tw + x] = static_cast<T>((1.0 - ty) * top + ty * bot);
        }
    }
    return dst;
}

}  // namespace detail

// decode -> grayscale-or-RGB -> bilinear resize -> scale to [0, 1].
// Returns a [channels x target_h x target_w] tensor.
template <typename T>
Tensor<T> load_image(const std::string& path, std::size_t target_h, std::size_t target_w,
                     std::size_t channels) {
    if (channels != 1 && channels != 3) throw UsageError("load_image: channels must be 1 or 3");
    const ImageBuffer img = decode_image(path);

    // split into float planes in the requested channel layout
    std::vector<std::vector<T>> planes(channels);
    const std::size_t n = img.width * img.height;
    for (auto& p : planes) p.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (img.channels == channels) {
            for (std::size_t c = 0; c < channels; ++c) {
                planes[c][i] = static_cast<T>(img.pixels[i * channels + c] / 255.0);
            }
        } else if (img.channels == 1) {
            const T v = static_cast<T>(img.pixels[i] / 255.0);
            for (std::size_t c = 0; c < channels; ++c) planes[c][i] = v;
        } else {
            // RGB to luma (Rec. 601)
            const double r = img.pixels[i * 3 + 0], g = img.pixels[i * 3 + 1],
                         b = img.pixels[i * 3 + 2];
            planes[0][i] = static_cast<T>((0.299 * r + 0.587 * g + 0.114 * b) / 255.0);
        }
    }

    std::vector<T> out;
    out.reserve(channels * target_h * target_w);
    for (auto& p : planes) {
        if (img.height == target_h && img.width == target_w) {
            out.insert(out.end(), p.begin(), p.end());
        } else {
            auto r = detail::bilinear_plane(p, img.height, img.width, target_h, target_w);
            out.insert(out.end(), r.begin(), r.end());
        }
    }
    return Tensor<T>({channels, target_h, target_w}, std::move(out));
}

}  // namespace cct
