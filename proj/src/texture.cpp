#include "activetrack/texture.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "activetrack/errors.hpp"

namespace activetrack {

bool Texture::transparent(int x, int y) const {
  const auto c = at(x, y);
  return c[0] == 1.0f && c[1] == 0.0f && c[2] == 1.0f;
}

std::array<float, 3> Texture::mean_color() const {
  std::array<double, 3> sum{0, 0, 0};
  size_t n = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (transparent(x, y)) continue;
      const auto c = at(x, y);
      for (int k = 0; k < 3; ++k) sum[k] += c[k];
      ++n;
    }
  }
  if (n == 0) return {0.f, 0.f, 0.f};
  return {static_cast<float>(sum[0] / n), static_cast<float>(sum[1] / n),
          static_cast<float>(sum[2] / n)};
}

namespace {

// Integer hash used for procedural noise; stable across platforms.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

float noise(std::uint64_t seed, int x, int y) {
  const std::uint64_t h = mix(seed * 1000003ULL + static_cast<std::uint64_t>(x) * 7919ULL +
                              static_cast<std::uint64_t>(y) * 104729ULL);
  return static_cast<float>((h >> 11) * (1.0 / 9007199254740992.0));
}

using Color = std::array<float, 3>;

float quantize(float v) {
  // Keep values on the 8-bit grid so PPM round trips are exact.
  return std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

template <class F>
Texture make(int w, int h, F&& shade) {
  Texture t{w, h, std::vector<float>(static_cast<size_t>(w) * h * 3)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Color c = shade(x, y);
      for (int k = 0; k < 3; ++k) t.rgb[3 * (static_cast<size_t>(y) * w + x) + k] = quantize(c[k]);
    }
  }
  return t;
}

Color scale(Color c, float s) { return {c[0] * s, c[1] * s, c[2] * s}; }

Texture brick(Color mortar, Color face, std::uint64_t seed) {
  return make(16, 16, [&](int x, int y) {
    const int row = y / 4;
    const int xo = (x + (row % 2) * 4) % 8;
    if (y % 4 == 3 || xo == 7) return mortar;
    return scale(face, 0.85f + 0.15f * noise(seed, x, y));
  });
}

constexpr Color kKey{1.0f, 0.0f, 1.0f};

// Upright figure on a transparent background.
Texture figure(Color body, Color accent, std::uint64_t seed) {
  const int w = 15, h = 31;
  return make(w, h, [&](int x, int y) -> Color {
    const float cx = 7.0f;
    const float dx = std::abs(x - cx);
    if (y < 8) {  // head
      const float r2 = dx * dx + (y - 4.0f) * (y - 4.0f);
      if (r2 > 14.0f) return kKey;
      if (y == 3 && (x == 5 || x == 9)) return accent;
      return body;
    }
    if (y < 21) {  // torso
      if (dx > 5.5f) return kKey;
      return scale(body, 0.8f + 0.2f * noise(seed, x, y));
    }
    if (dx < 1.0f || dx > 4.5f) return kKey;  // legs
    return scale(accent, 0.9f);
  });
}

Texture floating_ball(Color body, Color accent) {
  const int w = 15, h = 31;
  return make(w, h, [&](int x, int y) -> Color {
    const float dx = x - 7.0f, dy = y - 11.0f;
    const float r2 = dx * dx + dy * dy;
    if (r2 > 49.0f) return kKey;
    if (std::abs(dy - 0.0f) < 1.5f && std::abs(dx) < 2.0f) return accent;
    return scale(body, 1.0f - 0.01f * r2);
  });
}

}  // namespace

TexturePool builtin_texture_pool(int extra_random) {
  TexturePool pool;
  pool.push_back(brick({0.35f, 0.35f, 0.35f}, {0.55f, 0.5f, 0.45f}, 1));  // kBrick
  pool.push_back(make(16, 16, [](int x, int y) -> Color {                 // kStone
    const float n = noise(2, x / 2, y / 2);
    return {0.3f + 0.2f * n, 0.35f + 0.2f * n, 0.5f + 0.2f * n};
  }));
  pool.push_back(make(16, 16, [](int x, int y) -> Color {  // kWood
    const float band = 0.5f + 0.5f * std::sin(0.8f * x + 0.3f * noise(3, x, y));
    return {0.45f + 0.15f * band, 0.3f + 0.1f * band, 0.15f};
  }));
  pool.push_back(make(16, 16, [](int x, int y) -> Color {  // kChecker
    return ((x / 4 + y / 4) % 2) ? Color{0.25f, 0.55f, 0.3f} : Color{0.6f, 0.7f, 0.55f};
  }));
  pool.push_back(make(16, 16, [](int x, int y) -> Color {  // kFloor
    const float n = noise(5, x, y);
    return {0.3f + 0.05f * n, 0.28f + 0.05f * n, 0.25f + 0.05f * n};
  }));
  pool.push_back(make(16, 16, [](int x, int y) -> Color {  // kCeiling
    const float n = noise(6, x, y);
    return {0.7f + 0.05f * n, 0.7f + 0.05f * n, 0.72f + 0.05f * n};
  }));
  pool.push_back(figure({0.9f, 0.15f, 0.1f}, {1.0f, 0.9f, 0.2f}, 7));        // kMonster
  pool.push_back(floating_ball({0.6f, 0.1f, 0.7f}, {0.1f, 0.9f, 0.3f}));    // kCacodemon
  pool.push_back(figure({0.35f, 0.6f, 0.2f}, {0.2f, 0.2f, 0.25f}, 9));      // kZombie
  pool.push_back(make(16, 16, [](int x, int y) -> Color {                    // kFloorAlt
    return ((x / 8 + y / 8) % 2) ? Color{0.15f, 0.2f, 0.4f} : Color{0.2f, 0.25f, 0.45f};
  }));
  pool.push_back(make(16, 16, [](int x, int y) -> Color {  // kCeilingAlt
    const float n = noise(11, x, y);
    return {0.5f + 0.1f * n, 0.45f, 0.3f};
  }));
  for (int i = 0; i < extra_random; ++i) {
    const std::uint64_t seed = 100 + i;
    const Color base{noise(seed, 0, 1), noise(seed, 1, 0), noise(seed, 2, 2)};
    const int cell = 1 + static_cast<int>(noise(seed, 3, 3) * 4.0f);
    pool.push_back(make(16, 16, [&](int x, int y) -> Color {
      const float n = noise(seed, x / cell, y / cell);
      return {base[0] * (0.5f + n), base[1] * (0.5f + n), base[2] * (0.5f + n)};
    }));
  }
  return pool;
}

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

Texture read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  if (ppm_token(in) != "P6") throw FormatError(path + ": not a binary PPM (P6)");
  Texture t;
  int maxval = 0;
  try {
    t.width = std::stoi(ppm_token(in));
    t.height = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw FormatError(path + ": malformed PPM header");
  }
  if (t.width <= 0 || t.height <= 0 || maxval <= 0 || maxval > 255)
    throw FormatError(path + ": unsupported PPM dimensions or maxval");
  std::vector<unsigned char> bytes(static_cast<size_t>(t.width) * t.height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw FormatError(path + ": truncated PPM payload");
  t.rgb.resize(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i)
    t.rgb[i] = static_cast<float>(bytes[i]) / static_cast<float>(maxval);
  return t;
}

void write_ppm(const std::string& path, int width, int height, const std::vector<float>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> bytes(rgb.size());
  for (size_t i = 0; i < rgb.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(rgb[i], 0.0f, 1.0f) * 255.0f));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TexturePool load_texture_pool(const std::string& directory) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) throw EmptyTexturePool("no texture directory " + directory);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(directory)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  TexturePool pool;
  for (const auto& f : files) pool.push_back(read_ppm(f.string()));
  if (pool.empty()) throw EmptyTexturePool("no .ppm textures in " + directory);
  return pool;
}

void save_texture_pool(const TexturePool& pool, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  for (size_t i = 0; i < pool.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tex_%03zu.ppm", i);
    write_ppm((fs::path(directory) / name).string(), pool[i]);
  }
}

}  // namespace activetrack
