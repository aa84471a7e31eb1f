#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "archseg/error.hpp"
#include "archseg/io.hpp"

namespace archseg {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_to_message(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot) *slot = msg ? msg : "unknown libpng error";
    png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

}  // namespace

void write_image(const Image8& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3) {
        throw InvalidArgument("write_image: only 1- or 3-channel 8-bit images are supported");
    }
    if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw InvalidArgument("write_image: buffer size does not match dimensions");
    }
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("write_image: cannot open '" + path.string() + "' for writing");

    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                              png_error_to_message, png_warning_ignore);
    if (!png) throw IoError("write_image: libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("write_image: libpng initialisation failed");
    }

    std::vector<png_const_bytep> rows(static_cast<std::size_t>(image.height));
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int r = 0; r < image.height; ++r) rows[static_cast<std::size_t>(r)] = image.data.data() + r * stride;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("write_image: '" + path.string() + "': " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    if (std::fflush(file.get()) != 0) throw IoError("write_image: write to '" + path.string() + "' failed");
}

Image8 read_image(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw IoError("read_image: cannot open '" + path.string() + "'");

    png_byte signature[8] = {};
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
        throw IoError("read_image: '" + path.string() + "' is not a PNG file");
    }

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message,
                                             png_error_to_message, png_warning_ignore);
    if (!png) throw IoError("read_image: libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("read_image: libpng initialisation failed");
    }

    // Everything touched after setjmp lives in these outer objects.
    Image8 image;
    std::vector<png_bytep> rows;
    std::string unsupported;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("read_image: '" + path.string() + "': " + message);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (bit_depth != 8) {
        unsupported = "unsupported bit depth " + std::to_string(bit_depth) + " (only 8-bit is supported)";
    } else if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
        unsupported = "unsupported color type (only 8-bit gray or RGB is supported)";
    }
    if (!unsupported.empty()) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidArgument("read_image: '" + path.string() + "': " + unsupported);
    }

    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    image = Image8(static_cast<int>(width), static_cast<int>(height), channels);
    rows.resize(height);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = image.data.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    write_image(mask_to_image(mask), path);
}

BinaryMask read_mask(const std::filesystem::path& path) {
    const Image8 img = read_image(path);
    if (img.channels != 1) {
        throw InvalidArgument("read_mask: '" + path.string() + "' is not a single-channel image");
    }
    return image_to_mask(img);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace archseg
