from unittest import TestCase

from momentlimits.errors import ConfigError
from momentlimits.fields import FloatField, IntegerField, StringField
from momentlimits.form import BaseForm, Form
from momentlimits.meta import DefaultMeta
from momentlimits.validators import ValidationError
from tests.common import DummyPostData


class BaseFormTest(TestCase):
    def get_form(self, **kwargs):
        def validate_test(form, field):
            if field.data != 'foobar':
                raise ValidationError('error')

        return BaseForm({'test': StringField(validators=[validate_test])}, **kwargs)

    def test_data_proxy(self):
        form = self.get_form()
        form.process(test='foo')
        self.assertEqual(form.data, {'test': 'foo'})

    def test_errors_proxy(self):
        form = self.get_form()
        form.process(test='foobar')
        form.validate()
        self.assertEqual(form.errors, {})

        form = self.get_form()
        form.process()
        form.validate()
        self.assertEqual(form.errors, {'test': ['error']})

    def test_contains(self):
        form = self.get_form()
        self.assertTrue('test' in form)
        self.assertTrue('abcd' not in form)

    def test_iteration(self):
        form = BaseForm([('mu', IntegerField()), ('delta', FloatField())])
        self.assertEqual([field.name for field in form], ['mu', 'delta'])
        form.process(DummyPostData(mu=['2']))
        self.assertEqual(form['mu'].data, 2)
        self.assertEqual(form['delta'].data, None)

    def test_prefixes(self):
        form = self.get_form(prefix='spade')
        self.assertEqual(form['test'].name, 'spade-test')
        self.assertEqual(form['test'].short_name, 'test')
        form = self.get_form(prefix='spade.')
        form.process(DummyPostData({'spade.test': ['hello'], 'test': ['bye']}))
        self.assertEqual(form['test'].data, 'hello')

    def test_dashed_names(self):
        form = BaseForm({'n_max': IntegerField()})
        self.assertEqual(form['n_max'].name, 'n-max')
        self.assertEqual(form['n_max'].label, 'n-max')
        form.process({'n-max': 3, 'n_max': 7})
        self.assertEqual(form['n_max'].data, 3)

    def test_plain_mapping(self):
        form = BaseForm({'delta': FloatField(default=0.1)})
        form.process({'delta': None})
        self.assertEqual(form['delta'].data, 0.1)
        form.process({'delta': 0.25})
        self.assertEqual(form['delta'].data, 0.25)

    def test_formdata_wrapper_error(self):
        form = self.get_form()
        self.assertRaises(TypeError, form.process, [])

    def test_require_valid(self):
        form = self.get_form()
        form.process(test='foobar')
        self.assertEqual(form.require_valid(), {'test': 'foobar'})
        form.process()
        try:
            form.require_valid()
        except ConfigError as e:
            self.assertEqual(e.errors, {'test': ['error']})
            self.assertEqual(list(e.messages()), ['test: error'])
        else:
            self.fail('expected ConfigError')


class FormMetaTest(TestCase):
    def test_cached_fields(self):
        class F(Form):
            a = StringField()
            _m = StringField()

        self.assertEqual(F._unbound_fields, None)
        F()
        self.assertEqual(F._unbound_fields, [('a', F.a)])
        first = F._form_meta
        F()
        self.assertTrue(F._form_meta is first)

    def test_subclassing(self):
        class A(Form):
            a = StringField()
            c = StringField()

        class B(A):
            b = StringField()
            c = StringField()
        A()
        B()

        self.assertTrue(A.a is B.a)
        self.assertTrue(A.c is not B.c)
        self.assertEqual(A._unbound_fields, [('a', A.a), ('c', A.c)])
        self.assertEqual(B._unbound_fields, [('a', B.a), ('b', B.b), ('c', B.c)])

    def test_class_meta(self):
        class MetaA:
            pass

        class F(Form):
            Meta = MetaA

        self.assertEqual(F._form_meta, None)
        assert isinstance(F().meta, MetaA)
        assert issubclass(F._form_meta, MetaA)


class FormTest(TestCase):
    class F(Form):
        test = StringField()

        def validate_test(form, field):
            if field.data != 'foobar':
                raise ValidationError('error')

    def test_validate(self):
        form = self.F(test='foobar')
        self.assertEqual(form.validate(), True)

        form = self.F()
        self.assertEqual(form.validate(), False)
        self.assertEqual(form.errors, {'test': ['error']})

    def test_ordered_fields(self):
        class MyForm(Form):
            mu = IntegerField()
            delta = FloatField()
            n_max = IntegerField()

        self.assertEqual([x.name for x in MyForm()], ['mu', 'delta', 'n-max'])
        self.assertEqual(list(MyForm().data), ['mu', 'delta', 'n_max'])

    def test_keyword_data(self):
        self.assertEqual(self.F(test='foo').test.data, 'foo')

    def test_formdata_overrides_keywords(self):
        form = self.F({'test': 'from-file'}, test='default')
        self.assertEqual(form.test.data, 'from-file')

    def test_empty_formdata(self):
        self.assertEqual(self.F(DummyPostData({'other': 'other'})).test.data, None)
        self.assertEqual(self.F(DummyPostData()).test.data, None)


class MetaTest(TestCase):
    class F(Form):
        class Meta:
            foo = 9

        test = StringField()

    class G(Form):
        class Meta:
            foo = 12
            bar = 8

    class H(F, G):
        class Meta:
            quux = 42

    class I(F, G):
        pass

    def test_basic(self):
        form = self.H()
        meta = form.meta
        self.assertEqual(meta.foo, 9)
        self.assertEqual(meta.bar, 8)
        assert isinstance(meta, self.F.Meta)
        assert isinstance(meta, self.G.Meta)
        self.assertEqual(type(meta).__bases__, (
            self.H.Meta,
            self.F.Meta,
            self.G.Meta,
            DefaultMeta
        ))

    def test_missing_diamond(self):
        meta = self.I().meta
        self.assertEqual(type(meta).__bases__, (
            self.F.Meta,
            self.G.Meta,
            DefaultMeta
        ))

    def test_update_values(self):
        form = self.F(meta={'foo': 1, 'locales': ['de_DE']})
        self.assertEqual(form.meta.foo, 1)
        self.assertEqual(form.meta.locales, ['de_DE'])
        other = self.F().meta
        self.assertEqual(other.foo, 9)
        self.assertEqual(other.locales, False)
