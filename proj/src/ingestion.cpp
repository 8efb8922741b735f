#include "deid/ingestion.hpp"

#include "deid/unicode.hpp"

#include <expat.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_set>

namespace deid {

namespace {

struct XmlAnnotation {
  std::string element;
  std::map<std::string, std::string> attributes;
};

struct XmlScan {
  int text_elements = 0;
  int text_depth = 0;  // >0 while inside a TEXT element
  std::string text;
  std::vector<XmlAnnotation> annotations;
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto* scan = static_cast<XmlScan*>(user);
  const std::string element(name);
  if (scan->text_depth > 0) {
    ++scan->text_depth;
    return;
  }
  if (element == "TEXT") {
    ++scan->text_elements;
    scan->text_depth = 1;
    return;
  }
  XmlAnnotation a{element, {}};
  for (int i = 0; attrs[i] != nullptr; i += 2) a.attributes[attrs[i]] = attrs[i + 1];
  if (a.attributes.count("start") && a.attributes.count("end")) scan->annotations.push_back(std::move(a));
}

void XMLCALL on_end(void* user, const XML_Char*) {
  auto* scan = static_cast<XmlScan*>(user);
  if (scan->text_depth > 0) --scan->text_depth;
}

void XMLCALL on_chars(void* user, const XML_Char* s, int len) {
  auto* scan = static_cast<XmlScan*>(user);
  // Only the first TEXT element is kept; a second one is reported as an error.
  if (scan->text_depth > 0 && scan->text_elements == 1) scan->text.append(s, static_cast<std::size_t>(len));
}

XmlScan scan_xml(std::string_view bytes) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw Error(ErrorCode::Io, "cannot allocate XML parser");
  XmlScan scan;
  XML_SetUserData(parser.get(), &scan);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_chars);
  if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
    std::ostringstream msg;
    msg << XML_ErrorString(XML_GetErrorCode(parser.get())) << " at line "
        << XML_GetCurrentLineNumber(parser.get()) << ", column " << XML_GetCurrentColumnNumber(parser.get());
    throw Error(ErrorCode::XmlMalformed, msg.str());
  }
  return scan;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view strip_bom(std::string_view bytes) {
  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
  return bytes;
}

std::size_t parse_offset(const std::string& value, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::SpanMismatch, "annotation " + what + " attribute is not an offset: '" + value + "'");
  }
}

void xml_escape(std::string& out, std::string_view text, bool attribute) {
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '\r': out += "&#13;"; break;
      case '"':
        if (attribute) {
          out += "&quot;";
        } else {
          out += c;
        }
        break;
      case '\n':
        if (attribute) {
          out += "&#10;";
        } else {
          out += c;
        }
        break;
      case '\t':
        if (attribute) {
          out += "&#9;";
        } else {
          out += c;
        }
        break;
      default: out += c;
    }
  }
}

}  // namespace

Document load_letter_xml(std::string_view bytes, std::string doc_id, std::string file_name) {
  auto scan = scan_xml(bytes);
  if (scan.text_elements == 0) throw Error(ErrorCode::MissingTextElement, "no <TEXT> element found");
  if (scan.text_elements > 1) {
    throw Error(ErrorCode::MultipleTextElements,
                "expected exactly one <TEXT> element, found " + std::to_string(scan.text_elements));
  }
  return Document(std::move(doc_id), std::move(scan.text), DocumentFormat::I2b2Xml, std::move(file_name));
}

Document load_letter_text(std::string_view bytes, std::string doc_id, std::string file_name) {
  return Document(std::move(doc_id), std::string(strip_bom(bytes)), DocumentFormat::PlainText, std::move(file_name));
}

Document load_letter_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".xml") return load_letter_xml(bytes, path.stem().string(), path.filename().string());
  return load_letter_text(bytes, path.stem().string(), path.filename().string());
}

std::optional<EntityType> map_i2b2_category(std::string_view label) {
  static const std::map<std::string, EntityType> table = {
      // NAME
      {"NAME", EntityType::Name}, {"PATIENT", EntityType::Name}, {"DOCTOR", EntityType::Name},
      {"USERNAME", EntityType::Name},
      // PROFESSION
      {"PROFESSION", EntityType::Profession},
      // LOCATION
      {"LOCATION", EntityType::Location}, {"HOSPITAL", EntityType::Location},
      {"ORGANIZATION", EntityType::Location}, {"STREET", EntityType::Location}, {"CITY", EntityType::Location},
      {"STATE", EntityType::Location}, {"COUNTRY", EntityType::Location}, {"ZIP", EntityType::Location},
      {"LOCATION-OTHER", EntityType::Location}, {"OTHER", EntityType::Location},
      // AGE, DATE
      {"AGE", EntityType::Age}, {"DATE", EntityType::Date},
      // CONTACT
      {"CONTACT", EntityType::Contact}, {"PHONE", EntityType::Contact}, {"FAX", EntityType::Contact},
      {"EMAIL", EntityType::Contact}, {"URL", EntityType::Contact}, {"IPADDR", EntityType::Contact},
      {"IPADDRESS", EntityType::Contact},
      // ID
      {"ID", EntityType::Id}, {"SSN", EntityType::Id}, {"MEDICALRECORD", EntityType::Id},
      {"HEALTHPLAN", EntityType::Id}, {"ACCOUNT", EntityType::Id}, {"LICENSE", EntityType::Id},
      {"LICENCE", EntityType::Id}, {"VEHICLE", EntityType::Id}, {"DEVICE", EntityType::Id},
      {"BIOID", EntityType::Id}, {"IDNUM", EntityType::Id},
      // catch-all
      {"PHI", EntityType::Phi},
  };
  auto it = table.find(upper_ascii(trim(label)));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

GoldAnnotation load_gold_annotations(std::string_view bytes, const Document& doc) {
  auto scan = scan_xml(bytes);
  GoldAnnotation gold{doc.id(), {}};
  for (const auto& a : scan.annotations) {
    const auto type_it = a.attributes.find("TYPE");
    const std::string label = type_it != a.attributes.end() ? type_it->second : a.element;
    auto etype = map_i2b2_category(label);
    if (!etype) throw Error(ErrorCode::UnknownCategory, "unknown annotation category '" + label + "'");

    const auto start = parse_offset(a.attributes.at("start"), "start");
    const auto end = parse_offset(a.attributes.at("end"), "end");
    if (start >= end || end > doc.length()) {
      throw Error(ErrorCode::SpanMismatch, "annotation [" + std::to_string(start) + "," + std::to_string(end) +
                                               ") outside document '" + doc.id() + "'");
    }
    auto span = make_span(doc, start, end, *etype, SpanSource::Manual);
    if (auto text_it = a.attributes.find("text"); text_it != a.attributes.end() && text_it->second != span.surface) {
      throw Error(ErrorCode::SpanMismatch, "annotation [" + std::to_string(start) + "," + std::to_string(end) +
                                               ") text '" + text_it->second + "' but document has '" +
                                               span.surface + "'");
    }
    gold.spans.push_back(std::move(span));
  }
  gold.spans = validate_spans(doc, std::move(gold.spans));
  return gold;
}

std::string write_letter_xml(const Document& doc, const std::vector<EntitySpan>& annotations) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<deIdi2b2>\n<TEXT>";
  xml_escape(out, doc.text(), false);
  out += "</TEXT>\n<TAGS>\n";
  int counter = 0;
  for (const auto& s : annotations) {
    out += "<";
    out += type_label(s.etype);
    out += " id=\"P" + std::to_string(counter++) + "\" start=\"" + std::to_string(s.start) + "\" end=\"" +
           std::to_string(s.end) + "\" text=\"";
    xml_escape(out, s.surface, true);
    out += "\" TYPE=\"";
    out += type_label(s.etype);
    out += "\" comment=\"\" />\n";
  }
  out += "</TAGS>\n</deIdi2b2>\n";
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view bytes) {
  bytes = strip_bom(bytes);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const char c = bytes[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        row_has_content = false;
        break;
      default:
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Lexicon make_lexicon(EntityType etype, const std::vector<std::string>& entries) {
  Lexicon lex;
  lex.etype = etype;
  std::unordered_set<std::string> seen;
  for (const auto& raw : entries) {
    auto entry = trim(raw);
    if (entry.empty() || !seen.insert(entry).second) continue;
    lex.folded.push_back(fold_case_utf8(entry));
    lex.entries.push_back(std::move(entry));
  }
  if (lex.entries.empty()) {
    throw Error(ErrorCode::EmptyLexicon, "lexicon for " + std::string(type_label(etype)) + " has no entries");
  }
  return lex;
}

Lexicon load_lexicon_csv(std::string_view bytes, EntityType etype) {
  auto rows = parse_csv(bytes);
  std::vector<std::string> entries;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto first = trim(rows[i][0]);
    if (i == 0 && upper_ascii(first) == "NAME") continue;
    entries.push_back(first);
  }
  return make_lexicon(etype, entries);
}

Lexicon load_lexicon_lines(std::string_view bytes, EntityType etype) {
  bytes = strip_bom(bytes);
  std::vector<std::string> entries;
  std::size_t pos = 0;
  while (pos <= bytes.size()) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    entries.emplace_back(bytes.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return make_lexicon(etype, entries);
}

Lexicon load_lexicon_file(const std::filesystem::path& path, EntityType etype) {
  const auto bytes = read_file(path);
  if (path.extension() == ".csv") return load_lexicon_csv(bytes, etype);
  return load_lexicon_lines(bytes, etype);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace deid
