#pragma once

#include <png.h>
#include <zlib.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <jpeglib.h>

#include "../error.hpp"
#include "../hash.hpp"

namespace vqaadv::image {

/// 8-bit RGB raster, row-major, no padding.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t *at(int x, int y) { return &pixels[3 * (static_cast<std::size_t>(y) * width + x)]; }
    const std::uint8_t *at(int x, int y) const {
        return &pixels[3 * (static_cast<std::size_t>(y) * width + x)];
    }
};

inline bool is_png(std::string_view bytes) {
    return bytes.size() >= 8 && bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8);
}

inline bool is_jpeg(std::string_view bytes) {
    return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff &&
           static_cast<unsigned char>(bytes[1]) == 0xd8 && static_cast<unsigned char>(bytes[2]) == 0xff;
}

inline RgbImage decode_png(std::string_view bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(std::string("png decode: ") + img.message);
    img.format = PNG_FORMAT_RGB;
    RgbImage out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error(std::string("png decode: ") + img.message);
    }
    return out;
}

inline std::string encode_png(const RgbImage &rgb) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(rgb.width);
    img.height = static_cast<png_uint_32>(rgb.height);
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.pixels.data(), 0, nullptr))
        throw Error(std::string("png encode: ") + img.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, rgb.pixels.data(), 0, nullptr))
        throw Error(std::string("png encode: ") + img.message);
    out.resize(size);
    return out;
}

namespace detail {

inline void put_u32(std::string &out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

inline void put_chunk(std::string &out, const char *type, std::string_view data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body.append(data);
    out += body;
    uLong crc = crc32(0L, reinterpret_cast<const Bytef *>(body.data()), static_cast<uInt>(body.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

struct JpegErrorJump {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    std::longjmp(reinterpret_cast<JpegErrorJump *>(cinfo->err)->jump, 1);
}

} // namespace detail

/// Writes a binary raster (0 = keep, nonzero = set) as a 1-bit grayscale PNG.
inline std::string encode_bilevel_png(int width, int height, const std::vector<std::uint8_t> &bits) {
    if (bits.size() != static_cast<std::size_t>(width) * height)
        throw Error("mask raster size mismatch");
    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    detail::put_u32(ihdr, static_cast<std::uint32_t>(width));
    detail::put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += std::string("\x01\x00\x00\x00\x00", 5); // depth 1, grayscale, deflate, no filter, no interlace
    detail::put_chunk(out, "IHDR", ihdr);

    std::size_t row_bytes = (static_cast<std::size_t>(width) + 7) / 8;
    std::string raw;
    raw.reserve((row_bytes + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back('\0'); // filter type none
        for (std::size_t b = 0; b < row_bytes; ++b) {
            unsigned char byte = 0;
            for (int k = 0; k < 8; ++k) {
                std::size_t x = b * 8 + k;
                if (x < static_cast<std::size_t>(width) && bits[y * static_cast<std::size_t>(width) + x])
                    byte |= static_cast<unsigned char>(0x80 >> k);
            }
            raw.push_back(static_cast<char>(byte));
        }
    }
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    std::string z(len, '\0');
    if (compress2(reinterpret_cast<Bytef *>(z.data()), &len,
                  reinterpret_cast<const Bytef *>(raw.data()), static_cast<uLong>(raw.size()),
                  9) != Z_OK)
        throw Error("mask png: deflate failed");
    z.resize(len);
    detail::put_chunk(out, "IDAT", z);
    detail::put_chunk(out, "IEND", "");
    return out;
}

/// Decodes a PNG into a binary raster: any non-black pixel is set.
inline std::vector<std::uint8_t> decode_bilevel_png(std::string_view bytes, int &width, int &height) {
    RgbImage rgb = decode_png(bytes);
    width = rgb.width;
    height = rgb.height;
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < bits.size(); ++i)
        bits[i] = (rgb.pixels[3 * i] | rgb.pixels[3 * i + 1] | rgb.pixels[3 * i + 2]) ? 1 : 0;
    return bits;
}

inline RgbImage decode_jpeg(std::string_view bytes) {
    jpeg_decompress_struct cinfo{};
    detail::JpegErrorJump err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = detail::jpeg_error_exit;
    RgbImage out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("jpeg decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char *>(bytes.data()),
                 static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

/// Image bytes as PNG: PNG passes through untouched, JPEG is transcoded.
inline std::string as_png(std::string_view bytes) {
    if (is_png(bytes))
        return std::string(bytes);
    if (is_jpeg(bytes))
        return encode_png(decode_jpeg(bytes));
    throw Error("unsupported image format (expected PNG or JPEG)");
}

} // namespace vqaadv::image
