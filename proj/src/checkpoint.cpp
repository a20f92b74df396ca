#include "coevo/checkpoint.hpp"

#include "coevo/serialize.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

namespace coevo {

namespace {

constexpr char kMagic[8] = {'C', 'E', 'V', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void append_array(std::string& buf, const NamedArray& a) {
    bin::append_str(buf, a.name);
    bin::append<std::uint32_t>(buf, static_cast<std::uint32_t>(a.shape.size()));
    for (Eigen::Index d : a.shape) bin::append<std::int64_t>(buf, d);
    bin::append<std::uint64_t>(buf, static_cast<std::uint64_t>(a.data.size()));
    buf.append(reinterpret_cast<const char*>(a.data.data()),
               static_cast<size_t>(a.data.size()) * sizeof(double));
}

NamedArray read_array(bin::Reader& r) {
    NamedArray a;
    a.name = r.read_str();
    auto rank = r.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(r.read<std::int64_t>());
    auto n = r.read<std::uint64_t>();
    a.data.resize(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) a.data[static_cast<Eigen::Index>(i)] = r.read<double>();
    return a;
}

}  // namespace

Checkpoint Checkpoint::capture(const ParameterStore& store, const AdamOptimizer* opt,
                               const std::vector<std::string>& opt_names,
                               const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    for (const auto& [name, p] : store.entries())
        c.params.push_back({name, p.shape(), p.values()});
    if (opt) {
        if (opt_names.size() != opt->params().size())
            throw std::invalid_argument("checkpoint: optimizer name list size mismatch");
        c.step = opt->steps_taken();
        auto& o = const_cast<AdamOptimizer&>(*opt);
        for (size_t i = 0; i < opt_names.size(); ++i) {
            Shape s = opt->params()[i].shape();
            c.moments1.push_back({opt_names[i], s, o.moment1()[i]});
            c.moments2.push_back({opt_names[i], s, o.moment2()[i]});
        }
    }
    return c;
}

void Checkpoint::restore_params(ParameterStore& store) const {
    for (const auto& a : params) {
        if (!store.contains(a.name))
            throw std::runtime_error("checkpoint: model has no parameter '" + a.name + "'");
        Tensor t = store.find(a.name);
        if (t.shape() != a.shape)
            throw std::runtime_error("checkpoint: shape mismatch on '" + a.name + "': file " +
                                     shape_str(a.shape) + " vs model " + shape_str(t.shape()));
        t.set_values(a.data);
    }
}

void Checkpoint::restore_optimizer(AdamOptimizer& opt,
                                   const std::vector<std::string>& opt_names) const {
    if (opt_names.size() != opt.params().size())
        throw std::invalid_argument("checkpoint: optimizer name list size mismatch");
    std::map<std::string, const NamedArray*> m1, m2;
    for (const auto& a : moments1) m1[a.name] = &a;
    for (const auto& a : moments2) m2[a.name] = &a;
    for (size_t i = 0; i < opt_names.size(); ++i) {
        auto i1 = m1.find(opt_names[i]);
        auto i2 = m2.find(opt_names[i]);
        if (i1 == m1.end() || i2 == m2.end())
            throw std::runtime_error("checkpoint: no optimizer state for '" + opt_names[i] + "'");
        if (i1->second->data.size() != opt.params()[i].size())
            throw std::runtime_error("checkpoint: optimizer state size mismatch on '" +
                                     opt_names[i] + "'");
        opt.moment1()[i] = i1->second->data;
        opt.moment2()[i] = i2->second->data;
    }
    opt.set_steps(step);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string body;
    bin::append<std::uint32_t>(body, kVersion);
    bin::append<std::int64_t>(body, ckpt.step);
    bin::append_str(body, ckpt.config_text);
    bin::append<std::uint32_t>(body, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& a : ckpt.params) append_array(body, a);
    bin::append<std::uint32_t>(body, static_cast<std::uint32_t>(ckpt.moments1.size()));
    for (const auto& a : ckpt.moments1) append_array(body, a);
    for (const auto& a : ckpt.moments2) append_array(body, a);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    std::uint32_t crc = bin::crc32(body);
    out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < sizeof(kMagic) + sizeof(std::uint32_t) * 2)
        throw std::runtime_error("checkpoint: truncated file " + path);
    if (raw.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::string body = raw.substr(sizeof(kMagic), raw.size() - sizeof(kMagic) - sizeof(std::uint32_t));
    std::uint32_t stored;
    std::memcpy(&stored, raw.data() + raw.size() - sizeof(stored), sizeof(stored));
    if (bin::crc32(body) != stored)
        throw std::runtime_error("checkpoint: checksum failure in " + path);

    bin::Reader r{body};
    auto version = r.read<std::uint32_t>();
    if (version != kVersion)
        throw std::runtime_error("checkpoint: version mismatch in " + path + ": file has " +
                                 std::to_string(version) + ", reader supports " +
                                 std::to_string(kVersion));
    Checkpoint c;
    c.step = r.read<std::int64_t>();
    c.config_text = r.read_str();
    auto np = r.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < np; ++i) c.params.push_back(read_array(r));
    auto nm = r.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < nm; ++i) c.moments1.push_back(read_array(r));
    for (std::uint32_t i = 0; i < nm; ++i) c.moments2.push_back(read_array(r));
    return c;
}

}  // namespace coevo
