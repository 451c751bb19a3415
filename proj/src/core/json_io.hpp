#pragma once

// Internal JSON helpers shared by the atlas and report writers. Key order is
// insertion order, so emitted documents are byte-stable.

#include <json.hpp>

#include "certcalc.hpp"

namespace mildatlas {

using OJson = nlohmann::ordered_json;

inline OJson cert_to_json(const MildCert& c) {
    OJson j;
    j["A"] = c.A;
    j["B"] = c.B;
    j["C"] = c.C;
    if (c.order == kOrderInf)
        j["order"] = "inf";
    else
        j["order"] = c.order;
    j["weak"] = c.weak;
    j["arity"] = c.arity;
    j["value_bound"] = c.value_bound;
    return j;
}

inline MildCert cert_from_json(const OJson& j) {
    Order ord = kOrderInf;
    if (j.at("order").is_number_integer()) ord = j.at("order").get<int>();
    return make_cert(j.at("A").get<double>(), j.at("B").get<double>(), j.at("C").get<double>(),
                     ord, j.at("weak").get<bool>(), j.at("arity").get<int>(),
                     j.at("value_bound").get<double>());
}

inline OJson audit_to_json(const Audit& audit) {
    OJson arr = OJson::array();
    for (const auto& e : audit.entries) {
        OJson je;
        je["op"] = e.op;
        OJson ins = OJson::array();
        for (const auto& c : e.inputs) ins.push_back(cert_to_json(c));
        je["inputs"] = ins;
        je["output"] = cert_to_json(e.output);
        if (!e.note.empty()) je["note"] = e.note;
        arr.push_back(je);
    }
    return arr;
}

} // namespace mildatlas
