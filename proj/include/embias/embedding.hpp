#pragma once

// Immutable token -> vector table with word2vec-binary and GloVe-text
// loaders. Vectors are kept in file precision (32-bit floats); all downstream
// arithmetic widens to double. An Embedding never changes after construction
// and is safe to read from any number of threads.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <charconv>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace embias {

class EmbeddingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Either a read-only vector of length dim() or a miss carrying the exact
// query string.
class LookupResult {
  public:
    static LookupResult hit(std::span<const float> v) { return LookupResult(v, {}); }
    static LookupResult miss(std::string token) { return LookupResult({}, std::move(token)); }

    bool found() const { return !vec_.empty(); }
    std::span<const float> vec() const {
        if (!found()) throw EmbeddingError("lookup miss dereferenced for token '" + missing_ + "'");
        return vec_;
    }
    const std::string& missing_token() const { return missing_; }

  private:
    LookupResult(std::span<const float> v, std::string m) : vec_(v), missing_(std::move(m)) {}
    std::span<const float> vec_;
    std::string missing_;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const unsigned char cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (extra == 1 && cp < 0x80) return false;      // overlong
        if (extra == 2 && cp < 0x800) return false;     // overlong
        if (extra == 3 && cp < 0x10000) return false;   // overlong
        if (cp >= 0xD800 && cp <= 0xDFFF) return false; // surrogate
        if (cp > 0x10FFFF) return false;
        i += extra + 1;
    }
    return true;
}

inline float float_from_le(const unsigned char* p) {
    const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                            (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(u);
}

inline void float_to_le(float f, unsigned char* p) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    p[0] = static_cast<unsigned char>(u & 0xFF);
    p[1] = static_cast<unsigned char>((u >> 8) & 0xFF);
    p[2] = static_cast<unsigned char>((u >> 16) & 0xFF);
    p[3] = static_cast<unsigned char>((u >> 24) & 0xFF);
}

}  // namespace detail

class Embedding {
  public:
    // Validates the invariants: unique tokens, finite values, consistent dim.
    static Embedding from_rows(std::vector<std::string> words, std::vector<float> matrix,
                               std::size_t dim) {
        if (dim == 0) throw EmbeddingError("dim must be >= 1");
        if (words.empty()) throw EmbeddingError("embedding must contain at least one word");
        if (matrix.size() != words.size() * dim)
            throw EmbeddingError("matrix size does not match n_words x dim");
        for (float v : matrix)
            if (!std::isfinite(v)) throw EmbeddingError("non-finite value in embedding matrix");
        Embedding e;
        e.words_ = std::move(words);
        e.data_ = std::move(matrix);
        e.dim_ = dim;
        e.index_.reserve(e.words_.size());
        for (std::size_t i = 0; i < e.words_.size(); ++i) {
            if (!e.index_.emplace(e.words_[i], i).second)
                throw EmbeddingError("duplicate token '" + e.words_[i] + "'");
        }
        return e;
    }

    std::size_t size() const { return words_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& words() const { return words_; }

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(data_.data() + i * dim_, dim_);
    }

    // Exact, case-sensitive match; a miss is a value, not an error.
    LookupResult lookup(std::string_view token) const {
        const auto it = index_.find(std::string(token));
        if (it == index_.end()) return LookupResult::miss(std::string(token));
        return LookupResult::hit(row(it->second));
    }

    bool operator==(const Embedding& other) const {
        return dim_ == other.dim_ && words_ == other.words_ && data_ == other.data_;
    }

  private:
    std::vector<std::string> words_;
    std::vector<float> data_;  // row-major n_words x dim
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
};

// word2vec binary format: ASCII header "<n_words> <dim>\n", then per record
// the token bytes, one 0x20 separator, and dim little-endian 32-bit floats.
// An optional '\n' after the floats is tolerated (both conventions exist).
// Errors carry the byte offset where the problem was found.
inline Embedding load_word2vec_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EmbeddingError("cannot open '" + path + "'");

    const auto fail = [&](const std::string& what, std::uint64_t offset) -> void {
        throw EmbeddingError(path + ": " + what + " (byte offset " + std::to_string(offset) + ")");
    };

    std::uint64_t offset = 0;
    std::string header;
    for (;;) {
        const int c = in.get();
        if (c == EOF) fail("malformed header: unterminated first line", offset);
        ++offset;
        if (c == '\n') break;
        if (header.size() > 64) fail("malformed header: first line too long", 0);
        header.push_back(static_cast<char>(c));
    }
    std::uint64_t n_words = 0, dim = 0;
    {
        const char* b = header.data();
        const char* e = b + header.size();
        auto r1 = std::from_chars(b, e, n_words);
        if (r1.ec != std::errc{} || r1.ptr == e || *r1.ptr != ' ')
            fail("malformed header: expected '<n_words> <dim>'", 0);
        auto r2 = std::from_chars(r1.ptr + 1, e, dim);
        if (r2.ec != std::errc{} || r2.ptr != e)
            fail("malformed header: expected '<n_words> <dim>'", 0);
        if (n_words == 0 || dim == 0) fail("malformed header: zero n_words or dim", 0);
    }

    std::vector<std::string> words;
    words.reserve(n_words);
    std::vector<float> matrix;
    matrix.reserve(n_words * dim);
    std::vector<unsigned char> buf(dim * 4);
    std::unordered_map<std::string, std::uint64_t> seen;

    for (std::uint64_t w = 0; w < n_words; ++w) {
        const std::uint64_t record_offset = offset;
        std::string token;
        for (;;) {
            const int c = in.get();
            if (c == EOF)
                fail("truncated payload: expected " + std::to_string(n_words) + " records, got " +
                         std::to_string(w),
                     offset);
            ++offset;
            if (c == ' ') break;
            if (token.size() > 4096) fail("malformed record: token separator not found", record_offset);
            token.push_back(static_cast<char>(c));
        }
        if (!detail::valid_utf8(token)) fail("invalid UTF-8 in token", record_offset);
        if (!seen.emplace(token, record_offset).second)
            fail("duplicate token '" + token + "'", record_offset);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            fail("truncated payload inside vector of token '" + token + "'", offset);
        for (std::uint64_t j = 0; j < dim; ++j) {
            const float v = detail::float_from_le(buf.data() + j * 4);
            if (!std::isfinite(v))
                fail("non-finite float in vector of token '" + token + "', component " +
                         std::to_string(j),
                     offset + j * 4);
            matrix.push_back(v);
        }
        offset += dim * 4;
        if (in.peek() == '\n') {
            in.get();
            ++offset;
        }
        words.push_back(std::move(token));
    }
    if (in.peek() != EOF) fail("trailing bytes after final record", offset);

    try {
        return Embedding::from_rows(std::move(words), std::move(matrix), dim);
    } catch (const EmbeddingError& e) {
        throw EmbeddingError(path + ": " + e.what() + " (byte offset " + std::to_string(offset) + ")");
    }
}

// Writes space + floats + '\n' per record; reloading gives a bit-identical
// matrix and token order.
inline void save_word2vec_binary(const Embedding& emb, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw EmbeddingError("cannot open '" + path + "' for writing");
    out << emb.size() << ' ' << emb.dim() << '\n';
    std::vector<unsigned char> buf(emb.dim() * 4);
    for (std::size_t i = 0; i < emb.size(); ++i) {
        out << emb.words()[i] << ' ';
        const auto r = emb.row(i);
        for (std::size_t j = 0; j < emb.dim(); ++j) detail::float_to_le(r[j], buf.data() + j * 4);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        out << '\n';
    }
    if (!out) throw EmbeddingError("write failed for '" + path + "'");
}

// GloVe text format: one "<token> <v1> ... <vdim>" line per word, single
// spaces, dimension inferred from the first line. Errors name the 1-based
// line number.
inline Embedding load_glove_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EmbeddingError("cannot open '" + path + "'");

    std::vector<std::string> words;
    std::vector<float> matrix;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos || sp == 0)
            throw EmbeddingError(path + ": line " + std::to_string(line_no) +
                                 ": expected '<token> <v1> ...'");
        std::string token = line.substr(0, sp);
        if (!detail::valid_utf8(token))
            throw EmbeddingError(path + ": line " + std::to_string(line_no) +
                                 ": invalid UTF-8 in token");
        std::vector<float> row;
        const char* p = line.data() + sp + 1;
        const char* end = line.data() + line.size();
        while (p < end) {
            float v = 0.0f;
            const auto r = std::from_chars(p, end, v);
            if (r.ec != std::errc{})
                throw EmbeddingError(path + ": line " + std::to_string(line_no) +
                                     ": unparsable float after token '" + token + "'");
            if (!std::isfinite(v))
                throw EmbeddingError(path + ": line " + std::to_string(line_no) +
                                     ": non-finite value for token '" + token + "'");
            row.push_back(v);
            p = r.ptr;
            if (p < end) {
                if (*p != ' ')
                    throw EmbeddingError(path + ": line " + std::to_string(line_no) +
                                         ": expected single-space separation");
                ++p;
            }
        }
        if (row.empty())
            throw EmbeddingError(path + ": line " + std::to_string(line_no) + ": no values");
        if (dim == 0) {
            dim = row.size();
        } else if (row.size() != dim) {
            throw EmbeddingError(path + ": line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(dim) + " values, found " +
                                 std::to_string(row.size()));
        }
        words.push_back(std::move(token));
        matrix.insert(matrix.end(), row.begin(), row.end());
    }
    if (words.empty()) throw EmbeddingError(path + ": no rows");
    try {
        return Embedding::from_rows(std::move(words), std::move(matrix), dim);
    } catch (const EmbeddingError& e) {
        throw EmbeddingError(path + ": " + e.what());
    }
}

}  // namespace embias
