#include "microtrap/grid.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace microtrap {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'G', 'R'};

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode)
{
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open " + path);
    return f;
}

template <typename T>
void write_raw(std::FILE* f, const T* p, std::size_t n)
{
    if (std::fwrite(p, sizeof(T), n, f) != n)
        throw std::runtime_error("short write");
}

template <typename T>
void read_raw(std::FILE* f, T* p, std::size_t n)
{
    if (std::fread(p, sizeof(T), n, f) != n)
        throw std::runtime_error("short read");
}

template <typename T>
void write_grid(const std::string& path, const Grid3<T>& g,
                std::uint32_t code)
{
    auto f = open_or_throw(path, "wb");
    write_raw(f.get(), kMagic, 4);
    write_raw(f.get(), &code, 1);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(g.nx()),
                                   static_cast<std::uint32_t>(g.ny()),
                                   static_cast<std::uint32_t>(g.nz())};
    write_raw(f.get(), dims, 3);
    const double meta[4] = {g.origin().x(), g.origin().y(), g.origin().z(),
                            g.spacing()};
    write_raw(f.get(), meta, 4);
    write_raw(f.get(), g.data().data(), g.size());
}

template <typename T>
Grid3<T> read_grid(const std::string& path, std::uint32_t expect_code)
{
    auto f = open_or_throw(path, "rb");
    char magic[4];
    read_raw(f.get(), magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a grid file");
    std::uint32_t code = 0;
    read_raw(f.get(), &code, 1);
    if (code != expect_code)
        throw std::runtime_error(path + ": unexpected payload type");
    std::uint32_t dims[3];
    read_raw(f.get(), dims, 3);
    double meta[4];
    read_raw(f.get(), meta, 4);
    Grid3<T> g({static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                static_cast<int>(dims[2])},
               Vec3(meta[0], meta[1], meta[2]), meta[3]);
    read_raw(f.get(), g.data().data(), g.size());
    return g;
}

}  // namespace

void write_grid_u16(const std::string& path, const Grid3<std::uint16_t>& g)
{
    write_grid(path, g, 0);
}

void write_grid_f64(const std::string& path, const Grid3<double>& g)
{
    write_grid(path, g, 1);
}

Grid3<std::uint16_t> read_grid_u16(const std::string& path)
{
    return read_grid<std::uint16_t>(path, 0);
}

Grid3<double> read_grid_f64(const std::string& path)
{
    return read_grid<double>(path, 1);
}

}  // namespace microtrap
