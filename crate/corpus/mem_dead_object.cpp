int *escape() {
  int local = 5;
  return &local;
}

int main() {
  int *p = escape();
  return *p;
}
// VERDICT: FAILED
// PROPERTY: dereference failure: dead object
