#include "model/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace ooaf {

void save_checkpoint(const Net<float>& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "OOAF-CKPT 1\n" << net.cfg.to_json().dump() << "\n";
    visit_params(const_cast<NetParams<float>&>(net.params),
                 [&out](const std::string& name, MatT<float>& m) {
                     out << name << " 2 " << m.rows() << " " << m.cols() << "\n";
                     for (Eigen::Index r = 0; r < m.rows(); ++r)
                         for (Eigen::Index c = 0; c < m.cols(); ++c) {
                             float v = m(r, c);
                             out.write(reinterpret_cast<const char*>(&v), sizeof(float));
                         }
                 });
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Net<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "OOAF-CKPT 1")
        throw std::runtime_error("bad checkpoint magic in " + path);
    if (!std::getline(in, line)) throw std::runtime_error("missing config in " + path);
    Net<float> net;
    net.cfg = ModelConfig::from_json(nlohmann::json::parse(line));
    net.params = allocate_params<float>(net.cfg);
    visit_params(net.params, [&](const std::string& name, MatT<float>& m) {
        std::string header;
        if (!std::getline(in, header)) throw std::runtime_error("truncated checkpoint: " + path);
        std::istringstream hs(header);
        std::string tensor_name;
        int rank = 0;
        Eigen::Index rows = 0, cols = 0;
        hs >> tensor_name >> rank >> rows >> cols;
        if (tensor_name != name || rank != 2 || rows != m.rows() || cols != m.cols())
            throw std::runtime_error("checkpoint tensor mismatch at " + name + " in " + path);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                float v = 0.0f;
                if (!in.read(reinterpret_cast<char*>(&v), sizeof(float)))
                    throw std::runtime_error("truncated checkpoint data: " + path);
                m(r, c) = v;
            }
    });
    return net;
}

}  // namespace ooaf
