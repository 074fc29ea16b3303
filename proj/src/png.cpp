#include <cstdlib>
#include <stdexcept>

#include <zlib.h>

#include "p3/render.hpp"

namespace p3 {

namespace {

constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
    if (at + 4 > in.size()) throw std::runtime_error("png: truncated");
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(in[at])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + 3]));
}

void put_chunk(std::string& out, const char type[4], std::string_view data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body.append(data);
    out.append(body);
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

std::string encode_png(const RasterImage& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
        throw std::invalid_argument("encode_png: invalid image");
    }
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    std::string raw;
    raw.reserve((stride + 1) * image.height);
    for (int r = 0; r < image.height; ++r) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(image.pixels.data()) + r * stride, stride);
    }
    uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_len, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw std::runtime_error("encode_png: deflate failed");
    }
    packed.resize(packed_len);

    std::string out(reinterpret_cast<const char*>(kSignature), 8);
    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(image.width));
    put_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // colour type RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

RasterImage decode_png(std::string_view bytes) {
    if (bytes.size() < 8 || bytes.substr(0, 8) != std::string_view(reinterpret_cast<const char*>(kSignature), 8)) {
        throw std::runtime_error("png: bad signature");
    }
    std::size_t at = 8;
    int width = 0, height = 0;
    std::string idat;
    bool ended = false;
    while (!ended) {
        const std::uint32_t len = get_u32(bytes, at);
        if (at + 12 + len > bytes.size()) throw std::runtime_error("png: truncated chunk");
        const std::string_view type = bytes.substr(at + 4, 4);
        const std::string_view data = bytes.substr(at + 8, len);
        const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data() + at + 4), len + 4);
        if (crc != get_u32(bytes, at + 8 + len)) throw std::runtime_error("png: crc mismatch");
        if (type == "IHDR") {
            width = static_cast<int>(get_u32(data, 0));
            height = static_cast<int>(get_u32(data, 4));
            if (data[8] != 8 || data[9] != 2 || data[12] != 0) throw std::runtime_error("png: only 8-bit RGB non-interlaced supported");
        } else if (type == "IDAT") {
            idat.append(data);
        } else if (type == "IEND") {
            ended = true;
        }
        at += 12 + len;
    }
    if (width <= 0 || height <= 0) throw std::runtime_error("png: missing IHDR");
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    std::string raw((stride + 1) * height, '\0');
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &raw_len, reinterpret_cast<const Bytef*>(idat.data()),
                   static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw std::runtime_error("png: inflate failed");
    }
    RasterImage img(width, height);
    std::vector<std::uint8_t> prev(stride, 0);
    for (int r = 0; r < height; ++r) {
        const auto filter = static_cast<unsigned char>(raw[r * (stride + 1)]);
        const auto* line = reinterpret_cast<const std::uint8_t*>(raw.data()) + r * (stride + 1) + 1;
        std::uint8_t* cur = img.pixels.data() + r * stride;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= 3 ? cur[i - 3] : 0;
            const int b = prev[i];
            const int c = i >= 3 ? prev[i - 3] : 0;
            int pred = 0;
            switch (filter) {
                case 0: pred = 0; break;
                case 1: pred = a; break;
                case 2: pred = b; break;
                case 3: pred = (a + b) / 2; break;
                case 4: pred = paeth(a, b, c); break;
                default: throw std::runtime_error("png: bad filter type");
            }
            cur[i] = static_cast<std::uint8_t>((line[i] + pred) & 0xFF);
        }
        prev.assign(cur, cur + stride);
    }
    return img;
}

}  // namespace p3
