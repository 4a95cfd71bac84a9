#pragma once

// Minimal raster canvas with a 24-bit BMP serializer, used for learning-curve
// figures.  Coordinates are (x right, y down) with the origin at the top-left
// pixel; the BMP writer handles the format's bottom-up row order and 4-byte
// row padding internally.

#include <cstdint>
#include <string>
#include <vector>

namespace afa::io {

struct Color {
    std::uint8_t r = 0, g = 0, b = 0;
};

class Canvas {
public:
    Canvas(int width, int height, Color background);

    int width() const { return width_; }
    int height() const { return height_; }

    // All drawing primitives clip silently at the canvas edge.
    void set_pixel(int x, int y, Color c);
    Color pixel(int x, int y) const;
    void fill_rect(int x0, int y0, int x1, int y1, Color c);
    void line(int x0, int y0, int x1, int y1, Color c);

    // 5x7 bitmap font covering printable ASCII; scale multiplies glyph pixels.
    void text(int x, int y, const std::string& s, Color c, int scale = 1);
    static int text_width(const std::string& s, int scale = 1);
    static int text_height(int scale = 1);

    void save_bmp(const std::string& path) const;

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> rgb_;  // row-major, top-down, 3 bytes per pixel
};

}  // namespace afa::io
