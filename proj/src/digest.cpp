#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <memory>

namespace scenesmith {

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new())
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error("sha256: digest initialisation failed");
        }
    }

    void update(const void* data, size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }

    std::array<unsigned char, 32> finish()
    {
        std::array<unsigned char, 32> out{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
        return out;
    }

    std::string finish_hex()
    {
        static constexpr char kHex[] = "0123456789abcdef";
        const auto raw = finish();
        std::string s;
        s.reserve(64);
        for (unsigned char c : raw) {
            s.push_back(kHex[c >> 4]);
            s.push_back(kHex[c & 15]);
        }
        return s;
    }

private:
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

} // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes)
{
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.finish_hex();
}

std::string sha256_hex(std::string_view text)
{
    Sha256 h;
    h.update(text.data(), text.size());
    return h.finish_hex();
}

std::string sha256_file(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path);
    return sha256_hex(bytes);
}

std::string sha256_tree(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_directory(dir)) {
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
        }
    }
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& rel : files) {
        const std::string name = rel.generic_string();
        const std::string content_hash = sha256_file(dir / rel);
        h.update(name.data(), name.size() + 1);
        h.update(content_hash.data(), content_hash.size());
    }
    return h.finish_hex();
}

std::uint64_t digest64(std::span<const std::uint8_t> bytes)
{
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    const auto raw = h.finish();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | raw[i];
    return v;
}

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0) throw ServiceError("base64: length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw ServiceError("base64: invalid input");
    size_t len = static_cast<size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes produced by padding
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
    write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text_file(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path);
    return {bytes.begin(), bytes.end()};
}

} // namespace scenesmith
