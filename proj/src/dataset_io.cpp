#include "aspl/io_service.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace aspl {

namespace {

constexpr std::array<char, 5> kMagic{'A', 'S', 'P', 'L', '1'};
constexpr std::uint32_t kNoTruth = 0xFFFFFFFFu;

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string format_double(double x) {
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), end);
}

FeatureStore load_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    const std::string where = path.string() + ": ";

    std::string line;
    if (!std::getline(in, line)) throw LoadError(where + "line 1: missing header");
    const auto header = split_cells(line);
    if (header.size() < 2 || trim(header[0]) != "id") throw LoadError(where + "line 1: header must start with id,f0");
    const bool labelled = trim(header.back()) == "label";
    const std::size_t d = header.size() - 1 - (labelled ? 1 : 0);
    if (d == 0) throw LoadError(where + "line 1: header has no feature columns");
    for (std::size_t k = 0; k < d; ++k)
        if (trim(header[k + 1]) != "f" + std::to_string(k))
            throw LoadError(where + "line 1: expected column f" + std::to_string(k) + ", found '" +
                            trim(header[k + 1]) + "'");

    std::vector<double> values;
    std::vector<std::string> ids;
    std::vector<int> truth;
    std::vector<std::string> names;
    std::map<std::string, int> name_index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_cells(line);
        if (cells.size() != header.size())
            throw LoadError(where + "line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        const std::size_t row = ids.size();
        ids.push_back(trim(cells[0]));
        for (std::size_t k = 0; k < d; ++k) {
            const std::string cell = trim(cells[k + 1]);
            double x = 0;
            const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
            const bool parsed = ec == std::errc() && end == cell.data() + cell.size() && !cell.empty();
            if (!parsed || !std::isfinite(x))
                throw LoadError(where + "line " + std::to_string(line_no) + " (row " + std::to_string(row) +
                                "), column f" + std::to_string(k) + ": " +
                                (parsed ? "non-finite value" : "not a number") + " '" + cell + "'");
            values.push_back(x);
        }
        if (labelled) {
            const std::string label = trim(cells.back());
            if (label.empty() || label == "unknown") {
                truth.push_back(kUnknownCategory);
            } else {
                auto [it, inserted] = name_index.emplace(label, static_cast<int>(names.size()));
                if (inserted) names.push_back(label);
                truth.push_back(it->second);
            }
        }
    }
    if (ids.empty()) throw LoadError(where + "no data rows");

    const auto n = static_cast<Index>(ids.size());
    FeatureStore::Matrix x = Eigen::Map<FeatureStore::Matrix>(values.data(), n, static_cast<Index>(d));
    std::optional<std::vector<int>> t;
    if (labelled) t = std::move(truth);
    return FeatureStore(std::move(x), std::move(ids), std::move(t), std::move(names));
}

void save_text(const FeatureStore& store, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "id";
    for (Index k = 0; k < store.dim(); ++k) out << ",f" << k;
    if (store.has_truth()) out << ",label";
    out << '\n';
    for (Index i = 0; i < store.size(); ++i) {
        out << store.sample_id(i);
        for (Index k = 0; k < store.dim(); ++k) out << ',' << format_double(store.features()(i, k));
        if (store.has_truth()) out << ',' << store.truth_name(i).value_or("unknown");
        out << '\n';
    }
    if (!out) throw LoadError("write failed for " + path.string());
}

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> bytes, std::string where) : bytes_(std::move(bytes)), where_(std::move(where)) {}

    void need(std::size_t k, const char* what) const {
        if (offset_ + k > bytes_.size())
            throw LoadError(where_ + "offset " + std::to_string(offset_) + ": truncated while reading " + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[offset_ + b]) << (8 * b);
        offset_ += 4;
        return v;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[offset_++];
    }
    const unsigned char* take(std::size_t k, const char* what) {
        need(k, what);
        const auto* p = bytes_.data() + offset_;
        offset_ += k;
        return p;
    }
    std::size_t offset() const { return offset_; }
    std::size_t size() const { return bytes_.size(); }
    const std::string& where() const { return where_; }

private:
    std::vector<unsigned char> bytes_;
    std::string where_;
    std::size_t offset_ = 0;
};

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FeatureStore load_binary(const std::filesystem::path& path) {
    ByteReader r(read_bytes(path), path.string() + ": ");
    const auto* magic = r.take(kMagic.size(), "magic");
    if (std::memcmp(magic, kMagic.data(), kMagic.size()) != 0) throw LoadError(r.where() + "offset 0: unknown magic");
    const std::uint32_t n = r.u32("row count");
    const std::uint32_t d = r.u32("column count");
    const std::uint8_t has_truth = r.u8("truth flag");
    if (n == 0 || d == 0) throw LoadError(r.where() + "offset 5: empty matrix");
    if (has_truth > 1) throw LoadError(r.where() + "offset 13: truth flag must be 0 or 1");

    FeatureStore::Matrix x(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t k = 0; k < d; ++k) {
            const std::size_t at = r.offset();
            const std::uint32_t bits = r.u32("features");
            const auto f = std::bit_cast<float>(bits);
            if (!std::isfinite(f))
                throw LoadError(r.where() + "offset " + std::to_string(at) + ": non-finite value at row " +
                                std::to_string(i) + ", column " + std::to_string(k));
            x(i, k) = static_cast<double>(f);
        }

    std::optional<std::vector<int>> truth;
    std::vector<std::string> names;
    if (has_truth) {
        truth.emplace();
        std::uint32_t top = 0;
        bool any = false;
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::size_t at = r.offset();
            const std::uint32_t t = r.u32("truth");
            if (t == kNoTruth) {
                truth->push_back(kUnknownCategory);
                continue;
            }
            if (t > 0x7FFFFFFFu) throw LoadError(r.where() + "offset " + std::to_string(at) + ": truth index too large");
            truth->push_back(static_cast<int>(t));
            top = std::max(top, t);
            any = true;
        }
        if (any)
            for (std::uint32_t k = 0; k <= top; ++k) names.push_back("c" + std::to_string(k));
    }
    if (r.offset() != r.size())
        throw LoadError(r.where() + "offset " + std::to_string(r.offset()) + ": trailing bytes");

    std::vector<std::string> ids;
    for (std::uint32_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return FeatureStore(std::move(x), std::move(ids), std::move(truth), std::move(names));
}

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int k = 0; k < 4; ++k) b[static_cast<std::size_t>(k)] = static_cast<char>((v >> (8 * k)) & 0xFF);
    out.write(b.data(), 4);
}

void save_binary(const FeatureStore& store, const std::filesystem::path& path) {
    if (store.size() > 0xFFFFFFFFll || store.dim() > 0xFFFFFFFFll) throw LoadError("store too large for packed format");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(store.size()));
    put_u32(out, static_cast<std::uint32_t>(store.dim()));
    out.put(store.has_truth() ? 1 : 0);
    for (Index i = 0; i < store.size(); ++i)
        for (Index k = 0; k < store.dim(); ++k)
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(store.features()(i, k))));
    if (store.has_truth())
        for (Index i = 0; i < store.size(); ++i) {
            const int t = store.truth(i);
            put_u32(out, t == kUnknownCategory ? kNoTruth : static_cast<std::uint32_t>(t));
        }
    if (!out) throw LoadError("write failed for " + path.string());
}

}  // namespace

DatasetFormat detect_format(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (in) {
        std::array<char, 5> head{};
        in.read(head.data(), head.size());
        if (in.gcount() == static_cast<std::streamsize>(head.size()) && head == kMagic) return DatasetFormat::binary;
        if (in.gcount() > 0) return DatasetFormat::text;
    }
    const auto ext = path.extension().string();
    return ext == ".bin" || ext == ".aspl" ? DatasetFormat::binary : DatasetFormat::text;
}

FeatureStore load_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format) {
    if (!std::filesystem::exists(path)) throw LoadError("no such file: " + path.string());
    const DatasetFormat f = format.value_or(detect_format(path));
    try {
        return f == DatasetFormat::binary ? load_binary(path) : load_text(path);
    } catch (const DomainError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

void save_dataset(const FeatureStore& store, const std::filesystem::path& path, std::optional<DatasetFormat> format) {
    const auto ext = path.extension().string();
    const DatasetFormat f =
        format.value_or(ext == ".bin" || ext == ".aspl" ? DatasetFormat::binary : DatasetFormat::text);
    if (f == DatasetFormat::binary)
        save_binary(store, path);
    else
        save_text(store, path);
}

}  // namespace aspl
